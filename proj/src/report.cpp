#include "klab/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace klab {

void ConvergenceReport::add(double parameter, double error, double aux, double aux2) {
    entries.push_back(ReportEntry{parameter, error, aux, aux2});
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y,
                    double floor) {
    // plain least squares on (log x, log y)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (size_t i = 0; i < x.size() && i < y.size(); ++i) {
        if (!(x[i] > 0.0) || !(std::fabs(y[i]) > floor)) continue;
        const double lx = std::log(x[i]);
        const double ly = std::log(std::fabs(y[i]));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++m;
    }
    if (m < 2) return 0.0;
    const double denom = m * sxx - sx * sx;
    if (std::fabs(denom) < 1e-30) return 0.0;
    return (m * sxy - sx * sy) / denom;
}

double ConvergenceReport::fitted_rate(double floor) const {
    std::vector<double> x, y;
    x.reserve(entries.size());
    y.reserve(entries.size());
    for (const auto& e : entries) {
        x.push_back(e.parameter);
        y.push_back(e.error);
    }
    return loglog_slope(x, y, floor);
}

bool ConvergenceReport::decreasing_trend() const {
    for (size_t i = 1; i < entries.size(); ++i)
        if (std::fabs(entries[i].error) > std::fabs(entries[i - 1].error)) return false;
    return true;
}

double ConvergenceReport::first_error() const {
    return entries.empty() ? 0.0 : entries.front().error;
}

double ConvergenceReport::last_error() const {
    return entries.empty() ? 0.0 : entries.back().error;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

std::string csv_escape(const std::string& field) {
    bool needs = false;
    for (char c : field)
        if (c == ',' || c == '"' || c == '\n' || c == '\r') needs = true;
    if (!needs) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream f(path, std::ios::binary); // binary: LF endings on every platform
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    for (size_t i = 0; i < header.size(); ++i) {
        if (i) f << ',';
        f << csv_escape(header[i]);
    }
    f << '\n';
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) f << ',';
            f << csv_escape(row[i]);
        }
        f << '\n';
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << content;
    if (!f) throw std::runtime_error("write failed: " + path);
}

void write_report_csv(const std::string& path, const ConvergenceReport& rep) {
    std::vector<std::string> header = {rep.parameter_label, rep.error_label};
    const bool has_aux = !rep.aux_label.empty();
    const bool has_aux2 = !rep.aux2_label.empty();
    if (has_aux) header.push_back(rep.aux_label);
    if (has_aux2) header.push_back(rep.aux2_label);
    std::vector<std::vector<std::string>> rows;
    rows.reserve(rep.entries.size());
    for (const auto& e : rep.entries) {
        std::vector<std::string> row = {format_double(e.parameter), format_double(e.error)};
        if (has_aux) row.push_back(format_double(e.aux));
        if (has_aux2) row.push_back(format_double(e.aux2));
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace klab
