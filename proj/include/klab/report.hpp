// Convergence reports and file emission. A report is a list of
// (parameter, error) pairs with a log-log fitted rate; writers produce
// RFC-4180 CSV (LF line ends, '.' decimal, %.17g numbers) and JSON so
// reruns of the same config are byte-comparable.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace klab {

struct ReportEntry {
    double parameter = 0.0; // eps, dt, ... whatever is swept
    double error = 0.0;
    double aux = 0.0;      // bound_rhs, error estimate, ... column named by the report
    double aux2 = 0.0;
};

struct ConvergenceReport {
    std::string name;
    std::string parameter_label = "parameter";
    std::string error_label = "error";
    std::string aux_label;
    std::string aux2_label;
    std::vector<ReportEntry> entries;

    void add(double parameter, double error, double aux = 0.0, double aux2 = 0.0);

    // Least-squares slope of log|error| vs log(parameter). Entries with
    // error magnitude below `floor` are excluded (they sit at quadrature
    // noise and would corrupt the fit). Returns 0 if fewer than 2 usable.
    double fitted_rate(double floor = 1e-15) const;

    // Error magnitudes weakly decreasing as the parameter decreases
    // (entries are compared in the stored order, assumed largest-first).
    bool decreasing_trend() const;

    double first_error() const;
    double last_error() const;
};

// Least-squares slope of log(y) vs log(x); pairs with y <= floor skipped.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y,
                    double floor = 1e-15);

// Numbers are printed with %.17g so a re-run reproduces files bit-exactly.
std::string format_double(double v);
std::string csv_escape(const std::string& field);

// One CSV table: header row then data rows. Throws std::runtime_error on
// I/O failure. Rows are written in the given order; callers are expected
// to have reduced parallel results into a deterministic order already.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

void write_text_file(const std::string& path, const std::string& content);

// CSV of a ConvergenceReport: parameter,error,<aux?>,<aux2?> columns.
void write_report_csv(const std::string& path, const ConvergenceReport& rep);

// FNV-1a over a byte string; used to fingerprint configs in manifests.
std::uint64_t fnv1a(const std::string& bytes);

} // namespace klab
