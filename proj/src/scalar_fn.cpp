#include "klab/scalar_fn.hpp"

namespace klab {

Vec ScalarFn::gradient(double t, const Vec& x) const {
    if (grad) return grad(t, x);
    const int n = static_cast<int>(x.size());
    Vec g(n);
    Vec xp(x), xm(x);
    for (int j = 0; j < n; ++j) {
        xp[j] = x[j] + fd_step;
        xm[j] = x[j] - fd_step;
        g[j] = (val(t, xp) - val(t, xm)) / (2.0 * fd_step);
        xp[j] = x[j];
        xm[j] = x[j];
    }
    return g;
}

Mat ScalarFn::hessian(double t, const Vec& x) const {
    const int n = static_cast<int>(x.size());
    if (hess) return hess(t, x);
    Mat H(n);
    if (grad) {
        // central differences of the analytic gradient
        Vec xp(x), xm(x);
        for (int j = 0; j < n; ++j) {
            xp[j] = x[j] + fd_step;
            xm[j] = x[j] - fd_step;
            const Vec gp = grad(t, xp), gm = grad(t, xm);
            for (int i = 0; i < n; ++i) H(i, j) = (gp[i] - gm[i]) / (2.0 * fd_step);
            xp[j] = x[j];
            xm[j] = x[j];
        }
        // symmetrize
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double s = 0.5 * (H(i, j) + H(j, i));
                H(i, j) = H(j, i) = s;
            }
        return H;
    }
    const double h = fd_step;
    const double f0 = val(t, x);
    Vec y(x);
    for (int i = 0; i < n; ++i) {
        y[i] = x[i] + h;
        const double fp = val(t, y);
        y[i] = x[i] - h;
        const double fm = val(t, y);
        y[i] = x[i];
        H(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            y[i] = x[i] + h; y[j] = x[j] + h;
            const double fpp = val(t, y);
            y[j] = x[j] - h;
            const double fpm = val(t, y);
            y[i] = x[i] - h; y[j] = x[j] + h;
            const double fmp = val(t, y);
            y[j] = x[j] - h;
            const double fmm = val(t, y);
            y[i] = x[i]; y[j] = x[j];
            H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
        }
    return H;
}

double ScalarFn::partial(double t, const Vec& x, int j) const {
    if (grad) return grad(t, x)[j];
    Vec y(x);
    y[j] = x[j] + fd_step;
    const double fp = val(t, y);
    y[j] = x[j] - fd_step;
    const double fm = val(t, y);
    return (fp - fm) / (2.0 * fd_step);
}

ScalarFn constant_fn(double c) {
    ScalarFn f;
    f.val = [c](double, const Vec&) { return c; };
    f.grad = [](double, const Vec& x) { return Vec(x.size(), 0.0); };
    f.hess = [](double, const Vec& x) { return Mat(static_cast<int>(x.size())); };
    return f;
}

ScalarFn zero_fn() { return constant_fn(0.0); }

ScalarFn affine_fn(double c, const Vec& a) {
    ScalarFn f;
    f.val = [c, a](double, const Vec& x) { return c + dot(a, x); };
    f.grad = [a](double, const Vec&) { return a; };
    f.hess = [](double, const Vec& x) { return Mat(static_cast<int>(x.size())); };
    return f;
}

ScalarFn add(const ScalarFn& f, const ScalarFn& g) {
    ScalarFn r;
    r.fd_step = std::min(f.fd_step, g.fd_step);
    r.val = [f, g](double t, const Vec& x) { return f.val(t, x) + g.val(t, x); };
    if (f.has_grad() && g.has_grad())
        r.grad = [f, g](double t, const Vec& x) { return f.grad(t, x) + g.grad(t, x); };
    if (f.has_hess() && g.has_hess())
        r.hess = [f, g](double t, const Vec& x) { return f.hess(t, x) + g.hess(t, x); };
    return r;
}

ScalarFn scale(double s, const ScalarFn& f) {
    ScalarFn r;
    r.fd_step = f.fd_step;
    r.val = [s, f](double t, const Vec& x) { return s * f.val(t, x); };
    if (f.has_grad())
        r.grad = [s, f](double t, const Vec& x) { return s * f.grad(t, x); };
    if (f.has_hess())
        r.hess = [s, f](double t, const Vec& x) { return s * f.hess(t, x); };
    return r;
}

ScalarFn multiply(const ScalarFn& f, const ScalarFn& g) {
    ScalarFn r;
    r.fd_step = std::min(f.fd_step, g.fd_step);
    r.val = [f, g](double t, const Vec& x) { return f.val(t, x) * g.val(t, x); };
    if (f.has_grad() && g.has_grad()) {
        r.grad = [f, g](double t, const Vec& x) {
            Vec gr = f.val(t, x) * g.grad(t, x);
            axpy(g.val(t, x), f.grad(t, x), gr);
            return gr;
        };
        if (f.has_hess() && g.has_hess()) {
            r.hess = [f, g](double t, const Vec& x) {
                const double fv = f.val(t, x), gv = g.val(t, x);
                const Vec fg = f.grad(t, x), gg = g.grad(t, x);
                Mat H = fv * g.hess(t, x) + gv * f.hess(t, x);
                const int n = H.n;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        H(i, j) += fg[i] * gg[j] + gg[i] * fg[j];
                return H;
            };
        }
    }
    return r;
}

} // namespace klab
