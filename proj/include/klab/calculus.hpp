// Pointwise exterior calculus on R^n with the Euclidean metric.
//
// Conventions used throughout:
//  * channels live on increasing multi-indices; arbitrary tuples go through
//    the antisymmetric extension,
//  * the fiber inner product of two k-forms is the plain sum of channel
//    products over increasing tuples, normalized so that
//    <dx^I, dx^I> = 1 and  beta ^ star(alpha) = <beta, alpha> vol,
//  * the L2-adjoint of the Lie derivative satisfies
//    <<L_b K, theta>> = <<K, L_b^T theta>> for compactly supported theta.

#pragma once

#include "klab/fields.hpp"
#include "klab/quadrature.hpp"

namespace klab {

KFormField wedge(const KFormField& a, const KFormField& b);

// Interior product i_X a; degree drops by one.
KFormField contract(const VectorField& X, const KFormField& a);

// Exterior derivative; coefficients of the result carry analytic gradients
// when the input channels expose Hessians, otherwise they differentiate by
// finite differences when consumed downstream.
KFormField exterior_derivative(const KFormField& a);

KFormField hodge_star(const KFormField& a);
KFormField hodge_star_inverse(const KFormField& a);

// Cartan-formula-compatible Lie derivative, components
//   (L_b K)_C = b^l d_l K_C + sum_j sum_i K_{C, i at slot j} d_{C_j} b^i.
KFormField lie_derivative(const VectorField& b, const KFormField& K);

// L2 adjoint of the above:
//   (L_b^T th)_C = -d_l(b^l th_C) + sum_j sum_i th_{C, i at slot j} d_i b^{C_j}.
// For k = 0 this is -div(b th).
KFormField lie_derivative_adjoint(const VectorField& b, const KFormField& theta);

// Pushforward along a diffeomorphism (uses the inverse map and its Jacobian):
//   (phi_* K)_J(x) = sum_I K_I(psi(x)) det[ dpsi^{I}/dx^{J} ].
KFormField pushforward(const SampledDiffeo& phi, const KFormField& K);

// Pullback (uses the forward map):
//   (phi^* K)_J(x) = sum_I K_I(phi(x)) det[ dphi^{I}/dx^{J} ].
KFormField pullback(const SampledDiffeo& phi, const KFormField& K);

// Musical isomorphisms; with the Euclidean metric these are channel
// identities, kept explicit so index variance stays visible in call sites.
KFormField sharp(const KFormField& covariant);
KFormField flat(const KFormField& contravariant);

// Fiber inner product at a point and the L2 pairing <<F,K>> by quadrature.
double inner_product_pointwise(const KFormField& F, const KFormField& K,
                               double t, const Vec& x);
double l2_pairing(const KFormField& F, const KFormField& K,
                  const QuadratureGrid& grid, double t = 0.0);
QuadValue l2_pairing_with_estimate(const KFormField& F, const KFormField& K,
                                   const QuadratureGrid& grid, double t = 0.0);

// Integral of an n-form's single channel over the grid box.
double integrate_top_form(const KFormField& a, const QuadratureGrid& grid, double t = 0.0);

// Fiber norm |K(x)| = sqrt(sum of squared channels).
double fiber_norm(const KFormField& K, double t, const Vec& x);

// Channelwise spatial partial d_i of every coefficient (the covariant-slot
// gradient used by the weak-derivative test).
KFormField channel_partial(const KFormField& K, int dir);

// max over test forms and directions of |<<S_i, th>> + <<K, d_i th>>|.
double weak_derivative_check(const KFormField& K, const std::vector<KFormField>& S,
                             const QuadratureGrid& grid,
                             const std::vector<TestForm>& test_forms, double t = 0.0);

} // namespace klab
