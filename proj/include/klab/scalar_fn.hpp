// Scalar coefficient functions of (t, x). Fields are closures; a coefficient
// optionally carries analytic first and second space derivatives, and falls
// back to central finite differences (step fd_step) when they are absent.
// Time enters only as a parameter, derivatives are always spatial.

#pragma once

#include <functional>

#include "klab/linalg.hpp"

namespace klab {

constexpr double kDefaultFdStep = 1e-4;

struct ScalarFn {
    std::function<double(double, const Vec&)> val;
    std::function<Vec(double, const Vec&)> grad;  // optional
    std::function<Mat(double, const Vec&)> hess;  // optional
    double fd_step = kDefaultFdStep;

    ScalarFn() = default;
    explicit ScalarFn(std::function<double(double, const Vec&)> v) : val(std::move(v)) {}
    ScalarFn(std::function<double(double, const Vec&)> v,
             std::function<Vec(double, const Vec&)> g)
        : val(std::move(v)), grad(std::move(g)) {}
    ScalarFn(std::function<double(double, const Vec&)> v,
             std::function<Vec(double, const Vec&)> g,
             std::function<Mat(double, const Vec&)> h)
        : val(std::move(v)), grad(std::move(g)), hess(std::move(h)) {}

    bool has_grad() const { return static_cast<bool>(grad); }
    bool has_hess() const { return static_cast<bool>(hess); }

    double value(double t, const Vec& x) const { return val(t, x); }
    Vec gradient(double t, const Vec& x) const;   // analytic or FD of value
    Mat hessian(double t, const Vec& x) const;    // analytic, FD of grad, or FD of value
    double partial(double t, const Vec& x, int j) const; // d/dx_j, 0-based j
};

ScalarFn constant_fn(double c);
ScalarFn zero_fn();

// c + a.x with exact derivatives.
ScalarFn affine_fn(double c, const Vec& a);

// Pointwise combinations; derivative closures are combined when both inputs
// carry them, otherwise dropped (FD takes over downstream).
ScalarFn add(const ScalarFn& f, const ScalarFn& g);
ScalarFn scale(double s, const ScalarFn& f);
ScalarFn multiply(const ScalarFn& f, const ScalarFn& g);

} // namespace klab
