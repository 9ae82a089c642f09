// Pushforward solutions of the advection equation along stochastic
// characteristics, weak-form residual assembly, the pullback-constancy check,
// stochastic-integral identities for form-valued semimartingales, and the
// conservation law on advected chains. Solutions are per-path objects;
// nothing here averages over paths implicitly.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "klab/brownian.hpp"
#include "klab/calculus.hpp"
#include "klab/chain.hpp"
#include "klab/flow.hpp"
#include "klab/quadrature.hpp"

namespace klab {

// K(t,.) for one path: each evaluation integrates the inverse flow from the
// query point back to time 0 (reversed increments, negated fields) and
// applies the transport minors to K0 there. The returned channels ignore
// their time argument; t is frozen at construction and must sit on the path
// grid. Queries whose inverse-flow integration fails throw.
KFormField solve_pushforward(const KFormField& K0, const VectorField& b,
                             const std::vector<VectorField>& xis,
                             const BrownianPaths& paths, int path, double t,
                             SdeScheme scheme = SdeScheme::StratonovichHeun);

// One path's weak-form bookkeeping on the driver grid: the pairing series
// <<K_s, theta>>, the cumulative Lebesgue term, the left-point martingale
// sums, and the correction term, with
//   residual(s) = pairing(s) - pairing(0) + drift(s) + mart(s) - corr(s).
struct WeakResidualPath {
    Vec pairing;
    Vec drift_cum;
    Vec mart_cum;
    Vec corr_cum;
    Vec residual_series;
    double residual = 0.0;        // final time
    double error_estimate = 0.0;  // coarse-quadrature recomputation delta
    bool ok = true;
};

struct WeakResidualReport {
    Vec times;
    std::vector<WeakResidualPath> per_path;
    double rms_residual = 0.0;
    double mean_abs_residual = 0.0;
    double max_error_estimate = 0.0;
    int failed_paths = 0;
};

// Assembles the Ito-form weak identity for the pushforward solution against
// one test form. The pairings are evaluated in the initial frame (change of
// variables through the forward flow), so each path streams the quadrature
// nodes forward once; nothing is interpolated. Throws if theta's support
// sticks out of the grid box or the path-failure policy trips.
WeakResidualReport weak_residual(const KFormField& K0, const VectorField& b,
                                 const std::vector<VectorField>& xis,
                                 const BrownianPaths& paths, const TestForm& theta,
                                 const QuadratureGrid& grid,
                                 SdeScheme scheme = SdeScheme::StratonovichHeun,
                                 int threads = 1);

// Form-valued semimartingale K(t) = K0 + t G + sum_i W^i_t H_i with constant
// channel forms, driven by selected path drivers; the flow may ride the same
// drivers or disjoint ones (the cross-variation term is exercised both ways).
struct KiwCase {
    KFormField K0;
    KFormField G;
    std::vector<KFormField> H;
    std::vector<int> h_drivers;    // paths driver feeding each H_i
    std::vector<int> flow_drivers; // paths driver feeding each xi_j
};

struct KiwPath {
    double lhs_final = 0.0;   // <<phi_T^* K(T), theta>>
    double residual = 0.0;    // identity defect, cross-variation included
    double cross_term = 0.0;  // realized-covariation contribution
    double error_estimate = 0.0;
    bool ok = true;
};

struct KiwReport {
    std::vector<KiwPath> per_path;
    double rms_residual = 0.0;
    double rms_residual_nocross = 0.0;
    double mean_cross = 0.0;
    double stderr_cross = 0.0;
    double max_error_estimate = 0.0;
    int failed_paths = 0;
};

// Evaluates the pullback identity for K(t): both sides paired against theta,
// left-point sums for the dW/dB integrals, realized increment products for
// the covariation term, and the usual correction for the flow's own drivers.
KiwReport kiw_residual(const KiwCase& kc, const VectorField& b,
                       const std::vector<VectorField>& xis, const BrownianPaths& paths,
                       const TestForm& theta, const QuadratureGrid& grid,
                       SdeScheme scheme = SdeScheme::StratonovichHeun, int threads = 1);

struct PullbackConstancyReport {
    Vec per_path_gap; // |<<phi_T^* K(T), theta>> - <<K0, theta>>|
    double rms_gap = 0.0;
    int failed_paths = 0;
};

// For K(t) the transport solution itself, phi_t^* K(t) is constant in t; the
// final-time gap isolates the scheme error of the inverse-after-forward
// composition.
PullbackConstancyReport pullback_constancy(const KFormField& K0, const VectorField& b,
                                           const std::vector<VectorField>& xis,
                                           const BrownianPaths& paths, const TestForm& theta,
                                           const QuadratureGrid& grid,
                                           SdeScheme scheme = SdeScheme::StratonovichHeun,
                                           int threads = 1);

struct ConservationReport {
    double initial_integral = 0.0;
    Vec final_integrals; // per path
    Vec relative_gaps;
    double rms_gap = 0.0;
    int failed_paths = 0;
};

// Integral of K(t) over the advected chain vs the integral of K0 over the
// original chain. Quadrature nodes ride the forward flow as particles
// (tangents through the variational Jacobian); the field comes from an
// independent inverse-flow solve, so the gap measures scheme error, not an
// algebraic identity. Throws on rank-deficient pushed tangents.
ConservationReport conservation_check(const KFormField& K0, const Chain& chain,
                                      const VectorField& b,
                                      const std::vector<VectorField>& xis,
                                      const BrownianPaths& paths,
                                      SdeScheme scheme = SdeScheme::StratonovichHeun,
                                      int threads = 1);

struct SpecializationEntry {
    std::string label;
    double max_residual = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

struct SpecializationReport {
    std::vector<SpecializationEntry> entries;
    bool all_passed = false;
};

// Degree specializations on random smooth fields: the top-degree solution
// against the continuity equation, the 0-form solution against scalar
// transport, and the n=3 two-form Lie derivative against the classical
// induction-equation right-hand side.
SpecializationReport specialization_suite(std::uint64_t seed, int fields_per_case = 10);

} // namespace klab
