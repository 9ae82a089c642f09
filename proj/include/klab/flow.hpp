// Characteristic-flow integration: Stratonovich SDEs driven by BrownianPaths,
// forward and backward, with the variational (Jacobian) equation carried
// alongside. Two schemes are provided; Heun is the default, the corrected
// Ito-Euler scheme exists as a cross-check.

#pragma once

#include <string>
#include <vector>

#include "klab/brownian.hpp"
#include "klab/fields.hpp"
#include "klab/linalg.hpp"
#include "klab/report.hpp"

namespace klab {

enum class SdeScheme {
    StratonovichHeun,  // midpoint predictor-corrector (Stratonovich-native)
    ItoEulerCorrected, // Euler-Maruyama plus the drift 1/2 sum_k (Dxi_k) xi_k
};

struct FlowOptions {
    SdeScheme scheme = SdeScheme::StratonovichHeun;
    bool with_jacobian = true;
    int threads = 1;
    // |x| beyond this counts as blow-up and fails the track.
    double blowup_guard = 1e12;
};

// Streaming integrator: current positions (and Jacobians) for a set of points
// on one path, advanced one grid step at a time. Used directly where storing
// whole trajectories would be wasteful, e.g. weak-form residuals that track
// thousands of quadrature nodes.
//
// direction +1 integrates dX = b dt + sum_k xi_k o dW^k; direction -1
// integrates the reversed system (fields negated), which combined with
// reversed increment order approximates the inverse flow. The variational
// state solves dD = Db.D dt + sum_k Dxi_k.D o dW^k with the same scheme.
struct FlowStepper {
    int n = 0;
    const VectorField* b = nullptr;
    const std::vector<VectorField>* xis = nullptr;
    SdeScheme scheme = SdeScheme::StratonovichHeun;
    int direction = +1;
    bool with_jacobian = false;
    double blowup_guard = 1e12;

    std::vector<Vec> x;    // current positions
    std::vector<Mat> D;    // current Jacobians (with_jacobian only)
    Vec J;                 // current det(D) per point (with_jacobian only)
    std::vector<char> ok;  // frozen on first failure
    int failed = 0;

    FlowStepper(const VectorField& b_, const std::vector<VectorField>& xis_,
                SdeScheme scheme_, int direction_, bool with_jacobian_);

    void init(const std::vector<Vec>& x0s);
    // One step with field times t0 -> t1 and one increment per driver. The
    // step size is |t1 - t0|; backward callers pass decreasing times and the
    // forward increments in reversed order.
    void step(double t0, double t1, const Vec& dW);
};

// One stored trajectory: positions (and Jacobians, determinants) for a single
// (path, initial point) pair on the full grid, flattened time-major.
struct FlowTrack {
    Vec xs;  // (steps+1) * n
    Vec Ds;  // (steps+1) * n * n, empty when Jacobians were not requested
    Vec J;   // steps+1 determinants, empty likewise
    bool ok = true;
    int fail_step = -1; // first rejected step, -1 if clean
};

struct FlowEnsemble {
    int n = 0;
    int steps = 0;
    SdeScheme scheme = SdeScheme::StratonovichHeun;
    int direction = +1; // +1 forward, -1 backward
    PathSpec spec;
    Vec times; // integration parameter, steps+1 entries
    std::vector<Vec> x0s;
    std::vector<std::vector<FlowTrack>> tracks; // [path][point]

    int n_paths() const { return static_cast<int>(tracks.size()); }
    int n_points() const { return static_cast<int>(x0s.size()); }
    bool has_jacobians() const;

    Vec position(int path, int point, int step) const;
    Mat jacobian(int path, int point, int step) const;
    double determinant(int path, int point, int step) const;

    int failed_count() const;
    double failed_fraction() const;
};

// Integrates all paths in `paths` from each initial point. Trajectories that
// go non-finite, exceed the blow-up guard, or lose Jacobian positivity are
// frozen at the offending step, flagged, and excluded from estimates.
FlowEnsemble integrate_flow(const VectorField& b, const std::vector<VectorField>& xis,
                            const BrownianPaths& paths, const std::vector<Vec>& x0s,
                            const FlowOptions& options = {});

// Inverse-flow approximation on the same grid: reversed increment order with
// negated fields. Feeding the forward ensemble's endpoints as x0s recovers
// the starting points up to scheme error.
FlowEnsemble integrate_backward_flow(const VectorField& b, const std::vector<VectorField>& xis,
                                     const BrownianPaths& paths, const std::vector<Vec>& x0s,
                                     const FlowOptions& options = {});

// Throws when more than max_fraction of the tracks are flagged; silent
// dropout would bias every Monte Carlo estimate downstream.
void require_failure_rate_ok(const FlowEnsemble& ensemble, double max_fraction = 0.01);

struct MomentEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

// Monte Carlo estimate of sup over initial points of E[ max_t |Dphi|_F^p ],
// the grid max standing in for the time supremum. Flagged tracks are skipped.
MomentEstimate jacobian_moments(const FlowEnsemble& ensemble, double p);

// Couples a sequence of drifts b_1..b_N to the SAME paths and initial points,
// integrates each, and reports pathwise distances to the final member (the
// reference): error = sup_x E[max_t |x_i - x_ref|^p], aux = the same with
// Jacobian Frobenius distance. params labels the rows (defaults to 1..N-1).
// Throws if the sweep has fewer than 3 members or any member trips the
// failure policy.
ConvergenceReport flow_convergence_sweep(const std::vector<VectorField>& b_sequence,
                                         const std::vector<VectorField>& xis,
                                         const BrownianPaths& paths,
                                         const std::vector<Vec>& x0s, double p,
                                         const Vec& params = {},
                                         const FlowOptions& options = {});

// Snapshot rows: path, point, t, x..., D..., J. Jacobian columns are present
// only when the ensemble carries them.
void write_ensemble_csv(const FlowEnsemble& ensemble, const std::string& filepath);

} // namespace klab
