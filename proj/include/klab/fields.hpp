// Field types on R^n. A k-form stores one ScalarFn per increasing multi-index
// channel; a vector field stores one per component. Channels are closures,
// so derived fields (Lie derivatives, mollifications, pushforwards) stay
// evaluable anywhere without committing to a grid.

#pragma once

#include <string>
#include <vector>

#include "klab/multi_index.hpp"
#include "klab/scalar_fn.hpp"

namespace klab {

struct KFormField {
    int n = 0;
    int k = 0;
    MultiIndexSet idx;            // channel ordering, lexicographic
    std::vector<ScalarFn> coeff;  // size C(n,k)

    KFormField() = default;
    KFormField(int n_, int k_);

    int channels() const { return idx.count(); }

    // Channel values at (t,x), in idx order.
    Vec eval(double t, const Vec& x) const;

    // Antisymmetric component at an arbitrary 1-based tuple.
    double component(double t, const Vec& x, const std::vector<int>& tuple) const;

    const ScalarFn& channel(const std::vector<int>& increasing_tuple) const;
    ScalarFn& channel(const std::vector<int>& increasing_tuple);
};

KFormField zero_form(int n, int k);
// Constant-coefficient form: values per channel in idx order.
KFormField constant_form(int n, int k, const Vec& vals);
// dx^{i1} ^ ... ^ dx^{ik} for an increasing tuple.
KFormField basis_form(int n, const std::vector<int>& tuple);

KFormField add(const KFormField& a, const KFormField& b);
KFormField scale(double s, const KFormField& a);

struct VectorField {
    int n = 0;
    std::vector<ScalarFn> comp;
    std::string label;

    VectorField() = default;
    explicit VectorField(int n_) : n(n_), comp(static_cast<size_t>(n_)) {}

    Vec eval(double t, const Vec& x) const;
    // J(i,j) = d comp_i / d x_j, analytic rows where present.
    Mat jacobian(double t, const Vec& x) const;
    double divergence(double t, const Vec& x) const;
    bool has_jacobian() const;
};

VectorField constant_vf(const Vec& c);
// x -> A x + c with exact Jacobian.
VectorField linear_vf(const Mat& A, const Vec& c);

VectorField add(const VectorField& a, const VectorField& b);
VectorField scale(double s, const VectorField& a);

// Largest |J_fd - J_analytic| entry over the probe points; for validating
// user-supplied Jacobians against central differences.
double jacobian_mismatch(const VectorField& v, double t, const std::vector<Vec>& probes,
                         double h = 1e-5);

// Smooth bump exp(-1/(1 - |x/R|^2)) inside |x| < R, zero outside, with
// analytic derivatives. Used for compactly supported test forms.
ScalarFn bump_fn(double R);

// amplitude * sin(w.x + phase) with analytic derivatives; the building block
// for randomized smooth test fields.
ScalarFn trig_fn(const Vec& wavevec, double amplitude, double phase);

// Compactly supported test form: bump(R) times the given coefficient per
// channel. radius records the support for norm bookkeeping.
struct TestForm {
    KFormField form;
    double radius = 0.0;
};

TestForm make_test_form(int n, int k, double R, const std::vector<ScalarFn>& coeffs);
TestForm make_test_form(int n, int k, double R, const Vec& const_coeffs);

// A diffeomorphism sampled through closures: forward map, inverse, and both
// Jacobians. Pushforward/pullback consume whichever side they need.
struct SampledDiffeo {
    int n = 0;
    std::function<Vec(const Vec&)> fwd;
    std::function<Vec(const Vec&)> inv;
    std::function<Mat(const Vec&)> dfwd;
    std::function<Mat(const Vec&)> dinv;
};

SampledDiffeo affine_diffeo(const Mat& A, const Vec& c); // x -> Ax + c
SampledDiffeo compose(const SampledDiffeo& outer, const SampledDiffeo& inner);

} // namespace klab
