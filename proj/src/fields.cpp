#include "klab/fields.hpp"

#include <cmath>
#include <stdexcept>

namespace klab {

KFormField::KFormField(int n_, int k_) : n(n_), k(k_), idx(n_, k_) {
    coeff.resize(idx.count());
    for (auto& c : coeff) c = zero_fn();
}

Vec KFormField::eval(double t, const Vec& x) const {
    Vec v(coeff.size());
    for (size_t r = 0; r < coeff.size(); ++r) v[r] = coeff[r].value(t, x);
    return v;
}

double KFormField::component(double t, const Vec& x, const std::vector<int>& tuple) const {
    int r = -1;
    const int sgn = idx.lookup(tuple, r);
    if (sgn == 0) return 0.0;
    return sgn * coeff[r].value(t, x);
}

const ScalarFn& KFormField::channel(const std::vector<int>& tuple) const {
    return coeff[idx.rank(tuple)];
}

ScalarFn& KFormField::channel(const std::vector<int>& tuple) {
    return coeff[idx.rank(tuple)];
}

KFormField zero_form(int n, int k) { return KFormField(n, k); }

KFormField constant_form(int n, int k, const Vec& vals) {
    KFormField f(n, k);
    if (vals.size() != f.coeff.size())
        throw std::invalid_argument("constant_form: channel count mismatch");
    for (size_t r = 0; r < vals.size(); ++r) f.coeff[r] = constant_fn(vals[r]);
    return f;
}

KFormField basis_form(int n, const std::vector<int>& tuple) {
    KFormField f(n, static_cast<int>(tuple.size()));
    f.channel(tuple) = constant_fn(1.0);
    return f;
}

KFormField add(const KFormField& a, const KFormField& b) {
    if (a.n != b.n || a.k != b.k)
        throw std::invalid_argument("add(form): degree/dimension mismatch");
    KFormField r(a.n, a.k);
    for (int c = 0; c < r.channels(); ++c) r.coeff[c] = add(a.coeff[c], b.coeff[c]);
    return r;
}

KFormField scale(double s, const KFormField& a) {
    KFormField r(a.n, a.k);
    for (int c = 0; c < r.channels(); ++c) r.coeff[c] = scale(s, a.coeff[c]);
    return r;
}

Vec VectorField::eval(double t, const Vec& x) const {
    Vec v(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) v[i] = comp[i].value(t, x);
    return v;
}

Mat VectorField::jacobian(double t, const Vec& x) const {
    Mat J(n);
    for (int i = 0; i < n; ++i) {
        const Vec g = comp[i].gradient(t, x);
        for (int j = 0; j < n; ++j) J(i, j) = g[j];
    }
    return J;
}

double VectorField::divergence(double t, const Vec& x) const {
    double d = 0.0;
    for (int i = 0; i < n; ++i) d += comp[i].partial(t, x, i);
    return d;
}

bool VectorField::has_jacobian() const {
    for (const auto& c : comp)
        if (!c.has_grad()) return false;
    return true;
}

VectorField constant_vf(const Vec& c) {
    VectorField v(static_cast<int>(c.size()));
    for (size_t i = 0; i < c.size(); ++i) v.comp[i] = constant_fn(c[i]);
    v.label = "constant";
    return v;
}

VectorField linear_vf(const Mat& A, const Vec& c) {
    VectorField v(A.n);
    for (int i = 0; i < A.n; ++i) {
        Vec row(static_cast<size_t>(A.n));
        for (int j = 0; j < A.n; ++j) row[j] = A(i, j);
        v.comp[i] = affine_fn(c[i], row);
    }
    v.label = "linear";
    return v;
}

VectorField add(const VectorField& a, const VectorField& b) {
    if (a.n != b.n) throw std::invalid_argument("add(vector field): dimension mismatch");
    VectorField r(a.n);
    for (int i = 0; i < a.n; ++i) r.comp[i] = add(a.comp[i], b.comp[i]);
    return r;
}

VectorField scale(double s, const VectorField& a) {
    VectorField r(a.n);
    for (int i = 0; i < a.n; ++i) r.comp[i] = scale(s, a.comp[i]);
    return r;
}

double jacobian_mismatch(const VectorField& v, double t, const std::vector<Vec>& probes,
                         double h) {
    double worst = 0.0;
    for (const Vec& x : probes) {
        const Mat J = v.jacobian(t, x);
        Vec xp(x), xm(x);
        for (int i = 0; i < v.n; ++i)
            for (int j = 0; j < v.n; ++j) {
                xp[j] = x[j] + h;
                xm[j] = x[j] - h;
                const double fd = (v.comp[i].value(t, xp) - v.comp[i].value(t, xm)) / (2 * h);
                xp[j] = x[j];
                xm[j] = x[j];
                worst = std::max(worst, std::fabs(fd - J(i, j)));
            }
    }
    return worst;
}

ScalarFn bump_fn(double R) {
    if (R <= 0.0) throw std::invalid_argument("bump_fn: radius must be positive");
    // psi = exp(g(s)), s = |x|^2/R^2, g = -1/(1-s); derivatives via g', g''.
    auto s_of = [R](const Vec& x) {
        double s = 0.0;
        for (double v : x) s += v * v;
        return s / (R * R);
    };
    ScalarFn f;
    f.val = [s_of](double, const Vec& x) {
        const double s = s_of(x);
        if (s >= 1.0) return 0.0;
        return std::exp(-1.0 / (1.0 - s));
    };
    f.grad = [s_of, R](double, const Vec& x) {
        const int n = static_cast<int>(x.size());
        const double s = s_of(x);
        Vec g(n, 0.0);
        if (s >= 1.0) return g;
        const double psi = std::exp(-1.0 / (1.0 - s));
        const double u = 1.0 - s;
        const double gs = -1.0 / (u * u); // d/ds of -1/(1-s)
        for (int i = 0; i < n; ++i) g[i] = psi * gs * 2.0 * x[i] / (R * R);
        return g;
    };
    f.hess = [s_of, R](double, const Vec& x) {
        const int n = static_cast<int>(x.size());
        const double s = s_of(x);
        Mat H(n);
        if (s >= 1.0) return H;
        const double psi = std::exp(-1.0 / (1.0 - s));
        const double u = 1.0 - s;
        const double gs = -1.0 / (u * u);
        const double gss = -2.0 / (u * u * u);
        // d2psi/ds2 = psi*(gs^2 + gss); chain through s(x) = |x|^2/R^2
        const double psis = psi * gs;
        const double psiss = psi * (gs * gs + gss);
        const double c = 2.0 / (R * R);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j)
                H(i, j) = psiss * (c * x[i]) * (c * x[j]);
            H(i, i) += psis * c;
        }
        return H;
    };
    return f;
}

ScalarFn trig_fn(const Vec& wavevec, double amplitude, double phase) {
    const Vec w = wavevec;
    const double A = amplitude, c = phase;
    ScalarFn f;
    f.val = [w, A, c](double, const Vec& x) { return A * std::sin(dot(w, x) + c); };
    f.grad = [w, A, c](double, const Vec& x) { return (A * std::cos(dot(w, x) + c)) * w; };
    f.hess = [w, A, c](double, const Vec& x) {
        const int n = static_cast<int>(x.size());
        const double s = -A * std::sin(dot(w, x) + c);
        Mat H(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) H(i, j) = s * w[i] * w[j];
        return H;
    };
    return f;
}

TestForm make_test_form(int n, int k, double R, const std::vector<ScalarFn>& coeffs) {
    KFormField f(n, k);
    if (static_cast<int>(coeffs.size()) != f.channels())
        throw std::invalid_argument("make_test_form: channel count mismatch");
    const ScalarFn bump = bump_fn(R);
    for (int c = 0; c < f.channels(); ++c) f.coeff[c] = multiply(bump, coeffs[c]);
    return TestForm{f, R};
}

TestForm make_test_form(int n, int k, double R, const Vec& const_coeffs) {
    std::vector<ScalarFn> cs;
    cs.reserve(const_coeffs.size());
    for (double v : const_coeffs) cs.push_back(constant_fn(v));
    return make_test_form(n, k, R, cs);
}

SampledDiffeo affine_diffeo(const Mat& A, const Vec& c) {
    SampledDiffeo d;
    d.n = A.n;
    const Mat Ai = inverse(A);
    d.fwd = [A, c](const Vec& x) { return matvec(A, x) + c; };
    d.inv = [Ai, c](const Vec& x) { return matvec(Ai, x - c); };
    d.dfwd = [A](const Vec&) { return A; };
    d.dinv = [Ai](const Vec&) { return Ai; };
    return d;
}

SampledDiffeo compose(const SampledDiffeo& outer, const SampledDiffeo& inner) {
    SampledDiffeo d;
    d.n = outer.n;
    auto f1 = inner, f2 = outer;
    d.fwd = [f1, f2](const Vec& x) { return f2.fwd(f1.fwd(x)); };
    d.inv = [f1, f2](const Vec& x) { return f1.inv(f2.inv(x)); };
    d.dfwd = [f1, f2](const Vec& x) {
        const Vec mid = f1.fwd(x);
        return matmul(f2.dfwd(mid), f1.dfwd(x));
    };
    d.dinv = [f1, f2](const Vec& x) {
        const Vec mid = f2.inv(x);
        return matmul(f1.dinv(mid), f2.dinv(x));
    };
    return d;
}

} // namespace klab
