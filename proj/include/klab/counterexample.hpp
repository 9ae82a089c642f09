#pragma once

// Radial Holder drift with a cutoff, its closed-form flow, and the family of
// transported fields that all solve the same advection problem. The drift is
// C^alpha at the origin but not Lipschitz, so characteristics leaving the
// origin are non-unique: a whole cone of solutions x_v(t) = v t^{1/(1-alpha)}
// emanates from 0, and each choice of data on that cone (a "gamma selection")
// produces a distinct weak solution. The routines here build those solutions,
// measure how far apart they are, and check that each one satisfies the weak
// form of the transport equation to quadrature accuracy.
//
// Everything radial is in closed form: the speed ODE r' = r^alpha / (1-alpha)
// separates, giving r(t) = (r0^{1-alpha} + t)^{1/(1-alpha)} below the cutoff
// radius and straight-line motion at speed R^alpha/(1-alpha) above it. No
// numerical integrator is involved on this path, so the flow map, its inverse
// and both Jacobians are exact to rounding.

#include "klab/fields.hpp"
#include "klab/brownian.hpp"
#include "klab/report.hpp"

#include <functional>
#include <string>

namespace klab {

struct HolderDrift {
    double alpha = 0.5;  // Holder exponent, in (0,1)
    double R = 1.0;      // cutoff radius; |b| is capped at R^alpha/(1-alpha)
    int n = 2;
};

// b(x) = x_hat * min(|x|, R)^alpha / (1-alpha), b(0) = 0. The jacobian
// closure is analytic away from x = 0 and |x| = R and returns the zero
// matrix at the origin (b is not differentiable there; callers that probe
// the origin get the symmetric choice rather than garbage).
VectorField holder_drift(double alpha, double R, int n);

// Edge speed of the expanding non-uniqueness ball: radius of the set swept
// by characteristics started at the origin at time 0.
double holder_ball_radius(const HolderDrift& hd, double t);

// Forward radius map g_t(r0), backward radius map h_t(s), and their radial
// derivatives. Both handle the cutoff crossing exactly (power branch below
// R, linear branch above, composite when a trajectory spans both).
double holder_radius_forward(const HolderDrift& hd, double t, double r0);
double holder_radius_backward(const HolderDrift& hd, double t, double s);
double holder_radius_forward_deriv(const HolderDrift& hd, double t, double r0);
double holder_radius_backward_deriv(const HolderDrift& hd, double t, double s);

// Closed-form flow map of the drift at time t as a diffeomorphism of the
// region outside the non-uniqueness ball. fwd/dfwd are defined away from the
// origin; inv/dinv are defined outside the closed ball of radius
// holder_ball_radius(t), where the backward radius is strictly positive.
SampledDiffeo holder_flow_map(const HolderDrift& hd, double t);

// One explicit characteristic through the origin: leaves 0 at time t0 in
// direction v (unit vector), position v * (t - t0)^{1/(1-alpha)} for t >= t0.
// Only meaningful while the radius stays below the cutoff R.
Vec explicit_characteristics(const Vec& v, double t, double t0, double alpha);

// Inverse of the above: which characteristic passes through x at time t.
// Requires 0 < |x| <= t^{1/(1-alpha)} (inside the ball, off the origin) and
// |x| < R; throws std::invalid_argument otherwise. On the boundary t0 = 0.
struct T0Result {
    double t0 = 0.0;
    Vec v;  // unit direction
};
T0Result t0_map(double t, const Vec& x, double alpha);

// Data prescribed on the cone of origin characteristics: channel values of a
// k-form as a function of departure time t0 and direction v. `bound` is a
// caller-declared sup of the fiber norm, used for scale normalisation.
struct GammaSelection {
    int n = 2;
    int k = 0;
    std::function<Vec(double t0, const Vec& v)> value;
    double bound = 0.0;
    std::string label;
};

// The selection that matches the outside solution continuously at the ball
// boundary: the backward map sends the boundary to the origin and its
// jacobian degenerates there, so the limit is K0(0) for functions and 0 for
// k >= 1.
GammaSelection matched_gamma(const KFormField& K0);

// Constant selection gamma == c (channel vector of length C(n,k)).
GammaSelection constant_gamma(int n, int k, const Vec& c, std::string label = "constant");

// Value of the weak solution attached to a selection: pushforward of K0
// along the closed-form flow outside the ball, gamma(t0(t,x), v) inside.
Vec nonunique_solution_value(const GammaSelection& g, const KFormField& K0,
                             const HolderDrift& hd, double t, const Vec& x);

// Same thing packaged as a field (time argument of the field is ignored;
// the snapshot is taken at the fixed time t).
KFormField nonunique_solution_field(const GammaSelection& g, const KFormField& K0,
                                    const HolderDrift& hd, double t);

// Polar quadrature used for all the n = 2 pairings below. Radial panels are
// split at the ball boundary and at the cutoff radius, and the inner panel
// is graded with exponent 1/(1-alpha) so that the t0 = t - r^{1-alpha} kink
// and the r^{alpha-1} drift singularity both become smooth in the
// integration variable.
struct PolarQuad {
    double r_max = 2.0;
    int radial_nodes = 32;   // Gauss-Legendre nodes per panel
    int angular_nodes = 64;  // uniform (trapezoidal) angles
};

// L2 pairing of two n = 2 fields by polar quadrature with panel splits at
// the given radii (pass the discontinuity radii of the integrand).
double polar_pairing(const KFormField& u, const KFormField& eta, double t,
                     const PolarQuad& pq, const Vec& split_radii,
                     double inner_grade = 1.0);

// || u1 - u2 ||_{L2} over the ball of the given radius, fiber norm inside.
double l2_distance_on_ball(const KFormField& u1, const KFormField& u2, double t,
                           double radius, const PolarQuad& pq, double inner_grade = 1.0);

double ball_volume(int n, double radius);

// Weak-form residual of a time-indexed field family u(t) against a test
// form: max over sample times in [t1, t2] of
//     | d/dt <<u, theta>> + <<u, L_b^T theta>> |
// with the time derivative by central differences and the pairings by the
// panelled polar quadrature. The window must sit strictly above the initial
// layer: t1 - fd_dt must stay positive, and the ball boundary r*(t) is a
// panel split at every sample, so the discontinuous selections integrate
// cleanly. Throws if the window dips below fd_dt of 0.
struct WeakWindowConfig {
    double t1 = 0.5;
    double t2 = 1.0;
    int time_samples = 5;
    double fd_dt = 1e-3;
    PolarQuad quad;
};
double deterministic_weak_residual(const std::function<KFormField(double)>& u_of_t,
                                   const VectorField& b,
                                   const std::function<Vec(double)>& split_radii_at,
                                   double inner_grade, const TestForm& theta,
                                   const WeakWindowConfig& cfg);

// Convenience wrapper for a gamma-selection solution of the Holder drift.
double selection_weak_residual(const GammaSelection& g, const KFormField& K0,
                               const HolderDrift& hd, const TestForm& theta,
                               const WeakWindowConfig& cfg);

// Falsifiability control: smooth solvable drift, exact transported solution,
// with the region |x| < fake_radius overwritten by a constant. The genuine
// solution must pass the same residual check that the tampered one fails.
struct ControlCaseResult {
    double residual_genuine = 0.0;
    double residual_tampered = 0.0;
};
ControlCaseResult smooth_control_residuals(double fake_radius, double tamper_value,
                                           const WeakWindowConfig& cfg);

// Coupled-path comparison of flows of mollified drifts started at the
// origin. For each consecutive pair of epsilons the report row carries
//   parameter = eps_i
//   error     = E[ sup_t |x^{eps_i}(t) - x^{eps_{i+1}}(t)| ]  with noise
//   aux       = the same gap with the noise switched off
// Kernel centers are shifted alternately by +/- center_shift so that the
// zero-noise flows are free to pick different branches of the cone; with
// nondegenerate noise the gaps contract regardless. Noise is isotropic
// additive: one constant driver per coordinate, amplitude xi_amplitude.
struct NoiseSelectionConfig {
    double alpha = 0.5;
    double R = 10.0;
    double xi_amplitude = 1.0;
    Vec eps_list;           // decreasing mollification widths, >= 2 entries
    Vec center_shift;       // in units of epsilon; alternated in sign per member
    Vec x0;                 // start point; defaults to the origin
    int mollify_nodes = 24; // kernel quadrature points per axis
    int n = 2;
    bool assert_decreasing = false;  // refuse to run a degenerate setup
};
ConvergenceReport noise_selection_experiment(const NoiseSelectionConfig& cfg,
                                             const PathSpec& spec, int n_paths);

}  // namespace klab
