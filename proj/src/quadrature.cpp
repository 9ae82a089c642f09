#include "klab/quadrature.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>

namespace klab {

namespace {
std::map<int, std::pair<std::vector<double>, std::vector<double>>> g_gl_cache;
std::mutex g_gl_mutex;
} // namespace

void gauss_legendre(int m, std::vector<double>& x, std::vector<double>& w) {
    if (m < 1) throw std::invalid_argument("gauss_legendre: m >= 1");
    {
        std::lock_guard<std::mutex> lock(g_gl_mutex);
        auto it = g_gl_cache.find(m);
        if (it != g_gl_cache.end()) {
            x = it->second.first;
            w = it->second.second;
            return;
        }
    }
    x.assign(m, 0.0);
    w.assign(m, 0.0);
    // Newton iteration on Legendre polynomials, symmetric roots.
    const int half = (m + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (m + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < m; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = m * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / pp;
            z -= dz;
            if (std::fabs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[m - 1 - i] = w[i];
    }
    std::lock_guard<std::mutex> lock(g_gl_mutex);
    g_gl_cache[m] = {x, w};
}

QuadratureGrid::QuadratureGrid(Vec lo_, Vec hi_, int ppa, QuadRule r)
    : lo(std::move(lo_)), hi(std::move(hi_)), points_per_axis(ppa), rule(r) {
    if (lo.size() != hi.size()) throw std::invalid_argument("QuadratureGrid: box mismatch");
    for (size_t i = 0; i < lo.size(); ++i)
        if (!(lo[i] < hi[i])) throw std::invalid_argument("QuadratureGrid: empty box");
    if (ppa < 1) throw std::invalid_argument("QuadratureGrid: points_per_axis >= 1");
}

double QuadratureGrid::volume() const {
    double v = 1.0;
    for (size_t i = 0; i < lo.size(); ++i) v *= hi[i] - lo[i];
    return v;
}

const std::vector<QuadNode>& QuadratureGrid::nodes() const {
    if (!cache_.empty()) return cache_;
    const int n = dim();
    const int m = points_per_axis;
    std::vector<std::vector<double>> ax_x(n), ax_w(n);
    for (int d = 0; d < n; ++d) {
        ax_x[d].resize(m);
        ax_w[d].resize(m);
        const double a = lo[d], b = hi[d];
        if (rule == QuadRule::Midpoint) {
            const double h = (b - a) / m;
            for (int i = 0; i < m; ++i) {
                ax_x[d][i] = a + (i + 0.5) * h;
                ax_w[d][i] = h;
            }
        } else {
            std::vector<double> gx, gw;
            gauss_legendre(m, gx, gw);
            for (int i = 0; i < m; ++i) {
                ax_x[d][i] = 0.5 * (a + b) + 0.5 * (b - a) * gx[i];
                ax_w[d][i] = 0.5 * (b - a) * gw[i];
            }
        }
    }
    size_t total = 1;
    for (int d = 0; d < n; ++d) total *= static_cast<size_t>(m);
    cache_.reserve(total);
    std::vector<int> c(n, 0);
    while (true) {
        QuadNode node;
        node.x.resize(n);
        node.w = 1.0;
        for (int d = 0; d < n; ++d) {
            node.x[d] = ax_x[d][c[d]];
            node.w *= ax_w[d][c[d]];
        }
        cache_.push_back(std::move(node));
        int d = n - 1;
        while (d >= 0 && ++c[d] == m) c[d--] = 0;
        if (d < 0) break;
    }
    return cache_;
}

QuadratureGrid QuadratureGrid::refined(int factor) const {
    return QuadratureGrid(lo, hi, points_per_axis * factor, rule);
}

QuadratureGrid centered_box(int n, double half, int ppa, QuadRule r) {
    return QuadratureGrid(Vec(n, -half), Vec(n, half), ppa, r);
}

QuadValue integrate_with_estimate(const QuadratureGrid& grid,
                                  const std::function<double(const Vec&)>& f) {
    double coarse = 0.0;
    for (const auto& nd : grid.nodes()) coarse += nd.w * f(nd.x);
    const QuadratureGrid finer = grid.refined(2);
    double fine = 0.0;
    for (const auto& nd : finer.nodes()) fine += nd.w * f(nd.x);
    return QuadValue{fine, std::fabs(fine - coarse)};
}

} // namespace klab
