#include "klab/mollifier.hpp"

#include <cmath>
#include <stdexcept>

namespace klab {

namespace {

// exp(-1/(1-s)) for s = |u|^2 < 1, with derivatives in s.
double plateau(double s) { return (s < 1.0) ? std::exp(-1.0 / (1.0 - s)) : 0.0; }
double plateau_ds(double s) {
    if (s >= 1.0) return 0.0;
    const double d = 1.0 - s;
    return plateau(s) * (-1.0 / (d * d));
}
double plateau_dss(double s) {
    if (s >= 1.0) return 0.0;
    const double d = 1.0 - s;
    const double g1 = -1.0 / (d * d);        // d/ds of -1/(1-s)... sign handled below
    const double g2 = -2.0 / (d * d * d);
    // psi = e^g with g = -1/(1-s); psi'' in s is psi*(g'^2 + g'')
    return plateau(s) * (g1 * g1 + g2);
}

} // namespace

double Mollifier::profile(const Vec& u) const {
    double s = 0.0;
    for (double c : u) s += c * c;
    return normalization * plateau(s);
}

Vec Mollifier::profile_grad(const Vec& u) const {
    double s = 0.0;
    for (double c : u) s += c * c;
    const double ds = normalization * plateau_ds(s);
    Vec g(u.size());
    for (size_t i = 0; i < u.size(); ++i) g[i] = ds * 2.0 * u[i];
    return g;
}

Mat Mollifier::profile_hess(const Vec& u) const {
    const int d = static_cast<int>(u.size());
    double s = 0.0;
    for (double c : u) s += c * c;
    const double ds = normalization * plateau_ds(s);
    const double dss = normalization * plateau_dss(s);
    Mat H(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            H(i, j) = dss * 4.0 * u[i] * u[j] + (i == j ? 2.0 * ds : 0.0);
    return H;
}

double Mollifier::value(const Vec& z) const {
    Vec u(z.size());
    for (size_t i = 0; i < z.size(); ++i) u[i] = z[i] / epsilon - center_shift[i];
    return profile(u) / std::pow(epsilon, n);
}

Vec Mollifier::grad(const Vec& z) const {
    Vec u(z.size());
    for (size_t i = 0; i < z.size(); ++i) u[i] = z[i] / epsilon - center_shift[i];
    Vec g = profile_grad(u);
    const double scale = 1.0 / std::pow(epsilon, n + 1);
    for (double& c : g) c *= scale;
    return g;
}

Mat Mollifier::hess(const Vec& z) const {
    Vec u(z.size());
    for (size_t i = 0; i < z.size(); ++i) u[i] = z[i] / epsilon - center_shift[i];
    Mat H = profile_hess(u);
    const double scale = 1.0 / std::pow(epsilon, n + 2);
    for (double& c : H.a) c *= scale;
    return H;
}

Mollifier make_mollifier(int n, double epsilon, int conv_points_per_axis,
                         Vec center_shift) {
    if (n < 1) throw std::invalid_argument("make_mollifier: n must be >= 1");
    if (!(epsilon > 0.0)) throw std::invalid_argument("make_mollifier: epsilon must be > 0");
    Mollifier m;
    m.n = n;
    m.epsilon = epsilon;
    m.conv_points_per_axis = conv_points_per_axis;
    m.center_shift = center_shift.empty() ? Vec(n, 0.0) : center_shift;
    if (static_cast<int>(m.center_shift.size()) != n)
        throw std::invalid_argument("make_mollifier: center_shift dimension mismatch");

    // c = 1 / ( S_{n-1} * int_0^1 exp(-1/(1-r^2)) r^(n-1) dr )
    Vec xs, ws;
    gauss_legendre(64, xs, ws);
    double radial = 0.0;
    for (size_t q = 0; q < xs.size(); ++q) {
        const double r = 0.5 * (xs[q] + 1.0); // map [-1,1] -> [0,1]
        radial += 0.5 * ws[q] * plateau(r * r) * std::pow(r, n - 1);
    }
    const double sphere = 2.0 * std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n);
    m.normalization = 1.0 / (sphere * radial);
    return m;
}

double mollifier_mass(const Mollifier& m) {
    // integrate over the support box in profile coordinates
    QuadratureGrid box(Vec(m.n, -1.0), Vec(m.n, 1.0), std::max(m.conv_points_per_axis, 24));
    double s = 0.0;
    for (const auto& nd : box.nodes()) s += nd.w * m.profile(nd.x);
    return s;
}

std::vector<KernelNode> kernel_nodes(const Mollifier& m) {
    std::vector<KernelNode> tab;
    QuadratureGrid box(Vec(m.n, -1.0), Vec(m.n, 1.0), m.conv_points_per_axis);
    const auto& nodes = box.nodes();
    tab.reserve(nodes.size());
    const double inv_eps = 1.0 / m.epsilon;
    for (const auto& nd : nodes) {
        const double rho = m.profile(nd.x);
        if (rho == 0.0) continue; // corner nodes outside the unit ball
        KernelNode kn;
        kn.offset.resize(m.n);
        for (int i = 0; i < m.n; ++i)
            kn.offset[i] = m.epsilon * (m.center_shift[i] + nd.x[i]);
        kn.w_val = nd.w * rho;
        kn.w_grad = m.profile_grad(nd.x);
        for (double& c : kn.w_grad) c *= nd.w * inv_eps;
        kn.w_hess = m.profile_hess(nd.x);
        for (double& c : kn.w_hess.a) c *= nd.w * inv_eps * inv_eps;
        tab.push_back(std::move(kn));
    }
    return tab;
}

namespace {

using Table = std::shared_ptr<const std::vector<KernelNode>>;

ScalarFn mollify_scalar(const ScalarFn& f, Table tab, int n) {
    ScalarFn out;
    out.val = [f, tab, n](double t, const Vec& x) {
        double s = 0.0;
        Vec y(n);
        for (const KernelNode& q : *tab) {
            for (int i = 0; i < n; ++i) y[i] = x[i] - q.offset[i];
            s += q.w_val * f.value(t, y);
        }
        return s;
    };
    out.grad = [f, tab, n](double t, const Vec& x) {
        Vec g(n, 0.0);
        Vec y(n);
        for (const KernelNode& q : *tab) {
            for (int i = 0; i < n; ++i) y[i] = x[i] - q.offset[i];
            const double fv = f.value(t, y);
            if (fv == 0.0) continue;
            for (int i = 0; i < n; ++i) g[i] += q.w_grad[i] * fv;
        }
        return g;
    };
    if (f.has_grad()) {
        // d_m d_l (rho*f) = sum w_grad_m * (d_l f); symmetrized. Keeps the
        // quadrature defect in the first-derivative class, which is what
        // the iterated-commutator cancellations need.
        out.hess = [f, tab, n](double t, const Vec& x) {
            Mat H(n);
            Vec y(n);
            for (const KernelNode& q : *tab) {
                for (int i = 0; i < n; ++i) y[i] = x[i] - q.offset[i];
                const Vec fg = f.grad(t, y);
                for (int mi = 0; mi < n; ++mi)
                    for (int l = 0; l < n; ++l) H(mi, l) += q.w_grad[mi] * fg[l];
            }
            for (int mi = 0; mi < n; ++mi)
                for (int l = mi + 1; l < n; ++l) {
                    const double s = 0.5 * (H(mi, l) + H(l, mi));
                    H(mi, l) = s;
                    H(l, mi) = s;
                }
            return H;
        };
    } else {
        out.hess = [f, tab, n](double t, const Vec& x) {
            Mat H(n);
            Vec y(n);
            for (const KernelNode& q : *tab) {
                for (int i = 0; i < n; ++i) y[i] = x[i] - q.offset[i];
                const double fv = f.value(t, y);
                if (fv == 0.0) continue;
                for (int i = 0; i < n * n; ++i) H.a[i] += q.w_hess.a[i] * fv;
            }
            return H;
        };
    }
    return out;
}

} // namespace

KFormField mollify(const KFormField& K, const Mollifier& m) {
    if (K.n != m.n) throw std::invalid_argument("mollify: dimension mismatch");
    auto tab = std::make_shared<const std::vector<KernelNode>>(kernel_nodes(m));
    KFormField r(K.n, K.k);
    for (int c = 0; c < K.channels(); ++c) r.coeff[c] = mollify_scalar(K.coeff[c], tab, K.n);
    return r;
}

VectorField mollify_vf(const VectorField& v, const Mollifier& m) {
    if (v.n != m.n) throw std::invalid_argument("mollify_vf: dimension mismatch");
    auto tab = std::make_shared<const std::vector<KernelNode>>(kernel_nodes(m));
    VectorField r(v.n);
    r.label = v.label.empty() ? "mollified" : v.label + "-mollified";
    for (int c = 0; c < v.n; ++c) r.comp[c] = mollify_scalar(v.comp[c], tab, v.n);
    return r;
}

double mollify_distributional(const PairingFunctional& K, const Mollifier& m,
                              const KFormField& theta) {
    // K(rho_eps * theta); the kernel's symmetry is what makes this agree
    // with <<rho_eps * K, theta>> for function-type K.
    return K(mollify(theta, m));
}

} // namespace klab
