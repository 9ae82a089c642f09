// Mollification of k-form and vector fields by a smooth compactly
// supported kernel. The kernel is the normalized bump
//     rho(u) = c * exp(-1/(1-|u|^2)),  |u| < 1,
// scaled as rho_eps(z) = eps^-n rho(z/eps). Convolutions are tensor
// Gauss-Legendre sums over the scaled support box; mollified fields carry
// analytic gradient and hessian closures obtained by differentiating the
// kernel, not the field, so rough inputs still mollify to smooth outputs.

#pragma once

#include <cstdint>
#include <memory>

#include "klab/fields.hpp"
#include "klab/quadrature.hpp"

namespace klab {

struct Mollifier {
    int n = 0;
    double epsilon = 0.0;
    // Kernel center offset in units of epsilon. Zero for the symmetric
    // kernel; nonzero deliberately breaks symmetry (branch-selection
    // experiments) and is excluded from the symmetry certificate.
    Vec center_shift;
    int conv_points_per_axis = 12;
    double normalization = 0.0; // c above, fixed at construction

    // rho_eps and its first two derivatives at offset z from the origin.
    double value(const Vec& z) const;
    Vec grad(const Vec& z) const;
    Mat hess(const Vec& z) const;

    // Unscaled profile and derivatives as functions of u with |u| < 1.
    double profile(const Vec& u) const;
    Vec profile_grad(const Vec& u) const;
    Mat profile_hess(const Vec& u) const;
};

// Normalization constant is computed once per dimension from the radial
// integral (Gauss-Legendre) and the unit-sphere area 2 pi^(n/2)/Gamma(n/2).
Mollifier make_mollifier(int n, double epsilon, int conv_points_per_axis = 12,
                         Vec center_shift = Vec());

// Quadrature check of the kernel mass over its support box.
double mollifier_mass(const Mollifier& m);

// Precomputed convolution table. Sums need no further eps factors:
//   (rho_eps * f)(x)        ~ sum w_val  * f(x - offset)
//   grad(rho_eps * f)(x)    ~ sum w_grad * f(x - offset)
//   hess(rho_eps * f)(x)    ~ sum w_hess * f(x - offset)
struct KernelNode {
    Vec offset;
    double w_val;
    Vec w_grad;
    Mat w_hess;
};

std::vector<KernelNode> kernel_nodes(const Mollifier& m);

// Channelwise (rho_eps * K); output channels close over a precomputed
// kernel-node table shared across channels. Gradients differentiate the
// kernel. Hessians differentiate the kernel once and the input once when
// the input carries an analytic gradient (this keeps second-derivative
// quadrature in the well-behaved first-order class); only gradient-free
// inputs fall back to the second kernel derivative.
KFormField mollify(const KFormField& K, const Mollifier& m);

// Componentwise mollification of a vector field; Jacobian closure from
// the kernel gradient, so the result is C^1 even for Holder-only input.
VectorField mollify_vf(const VectorField& v, const Mollifier& m);

// Distribution route: K given as a pairing functional, evaluated on the
// mollified test form; equals <<mollify(K), theta>> for function-type K.
using PairingFunctional = std::function<double(const KFormField&)>;
double mollify_distributional(const PairingFunctional& K, const Mollifier& m,
                              const KFormField& theta);

} // namespace klab
