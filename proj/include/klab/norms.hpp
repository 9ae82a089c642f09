// Lp and Sobolev-type norms of fields over boxes and balls, plus the
// probe-based Holder seminorm estimator. Ball integrals are box quadrature
// with a radial indicator; the boundary costs accuracy, which is fine for
// the calibrated-constant bound checks these feed (they are norms, not
// identities).

#pragma once

#include <vector>

#include "klab/fields.hpp"
#include "klab/quadrature.hpp"

namespace klab {

// p in [1, inf); use lp_norm with p = infinity() for the sup over nodes.
double lp_norm(const KFormField& K, double p, const QuadratureGrid& grid, double t = 0.0);

// Same, restricted to |x - center| <= R (nodes outside are dropped; for
// p < inf the weight of the clipped cells is kept as-is).
double lp_norm_ball(const KFormField& K, double p, const Vec& center, double R,
                    const QuadratureGrid& grid, double t = 0.0);

// Sup of the fiber norm over ball nodes of the grid. The grid box should
// contain the ball.
double sup_norm_ball(const KFormField& K, const Vec& center, double R,
                     const QuadratureGrid& grid, double t = 0.0);

// Vector-field variants. Jacobian norms are Frobenius.
double vf_sup_norm_ball(const VectorField& v, const Vec& center, double R,
                        const QuadratureGrid& grid, double t = 0.0);
double vf_jacobian_sup_ball(const VectorField& v, const Vec& center, double R,
                            const QuadratureGrid& grid, double t = 0.0);
double vf_jacobian_l1_ball(const VectorField& v, const Vec& center, double R,
                           const QuadratureGrid& grid, double t = 0.0);
// Integral of sqrt(sum_i |Hess v^i|_F^2); second derivatives taken from
// the components' hessian closures (finite differences if absent).
double vf_hessian_l1_ball(const VectorField& v, const Vec& center, double R,
                          const QuadratureGrid& grid, double t = 0.0);
// |v| + |Dv|_F integrated over the ball: the W^{1,1} norm with the
// Frobenius bundle metric.
double vf_w11_ball(const VectorField& v, const Vec& center, double R,
                   const QuadratureGrid& grid, double t = 0.0);

// max over probe pairs of |f(x) - f(y)| / |x - y|^alpha. A lower bound on
// the true seminorm; pairs closer than 1e-12 are skipped.
struct ProbePair {
    Vec x, y;
};

std::vector<ProbePair> random_probe_pairs(int n, const Vec& center, double R,
                                          int count, std::uint64_t seed);

double holder_seminorm_estimate(const VectorField& v, double alpha,
                                const std::vector<ProbePair>& pairs, double t = 0.0);
double holder_seminorm_estimate(const KFormField& K, double alpha,
                                const std::vector<ProbePair>& pairs, double t = 0.0);

} // namespace klab
