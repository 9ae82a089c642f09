// Mollification commutators and their convergence sweeps. Two objects:
//
//   [L_b, rho_eps*]K           = L_b(K^eps) - (L_b K)^eps
//   [L_xi, [L_xi, rho_eps*]]K  = L_xi L_xi (K^eps) - 2 L_xi((L_xi K)^eps)
//                                + (L_xi L_xi K)^eps
//
// each paired against a compactly supported test form. The single
// commutator is evaluated both directly and through the equivalent
// double-integral form obtained by moving the transport derivative onto
// the kernel (the two must agree within quadrature error); the double
// commutator is evaluated directly only. Right-hand-side norm products
// back a calibrated-constant bound check; the sweep drives eps -> 0.

#pragma once

#include <string>
#include <vector>

#include "klab/fields.hpp"
#include "klab/mollifier.hpp"
#include "klab/norms.hpp"
#include "klab/quadrature.hpp"
#include "klab/report.hpp"

namespace klab {

struct CommutatorEvaluation {
    double epsilon = 0.0;
    double value = 0.0;          // direct route
    double value_split = 0.0;    // kernel-derivative double integral (single commutator)
    double bound_rhs = 0.0;      // norm product from the inequality's right side
    double error_estimate = 0.0; // |base - refined-convolution| self-estimate
    long kernel_nodes = 0;
};

// <<[L_b, rho_eps*]K, theta>>. The grid carries the outer pairing
// quadrature and must contain the support ball of theta. K and b need to
// be evaluable on that ball inflated by eps (plus the bound's +1 margin).
CommutatorEvaluation commutator_b(const VectorField& b, const KFormField& K,
                                  const Mollifier& m, const TestForm& theta,
                                  const QuadratureGrid& grid);

// <<[L_xi, [L_xi, rho_eps*]]K, theta>>; bound_rhs uses
// ||theta|| ||K|| (||xi||_inf ||hess xi||_L1 + ||grad xi||_inf ||grad xi||_L1).
CommutatorEvaluation double_commutator_xi(const VectorField& xi, const KFormField& K,
                                          const Mollifier& m, const TestForm& theta,
                                          const QuadratureGrid& grid);

enum class CommutatorKind { Transport, ItoCorrection };

struct CommutatorSweep {
    ConvergenceReport report; // entries: (eps, value, bound_rhs, error_estimate)
    std::vector<CommutatorEvaluation> evaluations;
    double fitted_constant = 0.0; // calibrated at the coarsest eps, 1.25 safety
    bool bound_holds = true;      // |value| <= fitted_constant * bound_rhs at every eps
    bool split_agrees = true;     // direct vs split within 3x combined estimates
    double slope = 0.0;           // log-log rate of |value| vs eps
};

// eps_list must be strictly decreasing, length >= 3, all < 1.
CommutatorSweep epsilon_sweep(CommutatorKind kind, const VectorField& field,
                              const KFormField& K, const TestForm& theta,
                              const QuadratureGrid& grid,
                              const std::vector<double>& eps_list,
                              int conv_points_per_axis = 48);

} // namespace klab
