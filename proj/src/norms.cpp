#include "klab/norms.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "klab/calculus.hpp"
#include "klab/rng.hpp"

namespace klab {

namespace {

bool in_ball(const Vec& x, const Vec& center, double R) {
    double d2 = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - center[i];
        d2 += d * d;
    }
    return d2 <= R * R;
}

double frob(const Mat& A) {
    double s = 0.0;
    for (double v : A.a) s += v * v;
    return std::sqrt(s);
}

template <typename F>
double ball_integral(const QuadratureGrid& grid, const Vec& center, double R, F&& f) {
    double s = 0.0;
    for (const auto& nd : grid.nodes())
        if (in_ball(nd.x, center, R)) s += nd.w * f(nd.x);
    return s;
}

template <typename F>
double ball_sup(const QuadratureGrid& grid, const Vec& center, double R, F&& f) {
    double m = 0.0;
    for (const auto& nd : grid.nodes())
        if (in_ball(nd.x, center, R)) m = std::max(m, f(nd.x));
    return m;
}

} // namespace

double lp_norm(const KFormField& K, double p, const QuadratureGrid& grid, double t) {
    if (p < 1.0) throw std::invalid_argument("lp_norm: p must be >= 1");
    if (std::isinf(p)) {
        double m = 0.0;
        for (const auto& nd : grid.nodes()) m = std::max(m, fiber_norm(K, t, nd.x));
        return m;
    }
    double s = 0.0;
    for (const auto& nd : grid.nodes()) s += nd.w * std::pow(fiber_norm(K, t, nd.x), p);
    return std::pow(s, 1.0 / p);
}

double lp_norm_ball(const KFormField& K, double p, const Vec& center, double R,
                    const QuadratureGrid& grid, double t) {
    if (p < 1.0) throw std::invalid_argument("lp_norm_ball: p must be >= 1");
    if (std::isinf(p)) return sup_norm_ball(K, center, R, grid, t);
    const double s = ball_integral(grid, center, R, [&](const Vec& x) {
        return std::pow(fiber_norm(K, t, x), p);
    });
    return std::pow(s, 1.0 / p);
}

double sup_norm_ball(const KFormField& K, const Vec& center, double R,
                     const QuadratureGrid& grid, double t) {
    return ball_sup(grid, center, R, [&](const Vec& x) { return fiber_norm(K, t, x); });
}

double vf_sup_norm_ball(const VectorField& v, const Vec& center, double R,
                        const QuadratureGrid& grid, double t) {
    return ball_sup(grid, center, R, [&](const Vec& x) { return norm2(v.eval(t, x)); });
}

double vf_jacobian_sup_ball(const VectorField& v, const Vec& center, double R,
                            const QuadratureGrid& grid, double t) {
    return ball_sup(grid, center, R, [&](const Vec& x) { return frob(v.jacobian(t, x)); });
}

double vf_jacobian_l1_ball(const VectorField& v, const Vec& center, double R,
                           const QuadratureGrid& grid, double t) {
    return ball_integral(grid, center, R,
                         [&](const Vec& x) { return frob(v.jacobian(t, x)); });
}

double vf_hessian_l1_ball(const VectorField& v, const Vec& center, double R,
                          const QuadratureGrid& grid, double t) {
    return ball_integral(grid, center, R, [&](const Vec& x) {
        double s = 0.0;
        for (const auto& c : v.comp) {
            const Mat H = c.hessian(t, x);
            for (double h : H.a) s += h * h;
        }
        return std::sqrt(s);
    });
}

double vf_w11_ball(const VectorField& v, const Vec& center, double R,
                   const QuadratureGrid& grid, double t) {
    return ball_integral(grid, center, R, [&](const Vec& x) {
        return norm2(v.eval(t, x)) + frob(v.jacobian(t, x));
    });
}

std::vector<ProbePair> random_probe_pairs(int n, const Vec& center, double R,
                                          int count, std::uint64_t seed) {
    std::vector<ProbePair> pairs;
    pairs.reserve(count);
    for (int i = 0; i < count; ++i) {
        ProbePair p;
        p.x = ball_point(n, center, R, seed, 2 * static_cast<std::uint64_t>(i));
        p.y = ball_point(n, center, R, seed, 2 * static_cast<std::uint64_t>(i) + 1);
        pairs.push_back(std::move(p));
    }
    return pairs;
}

namespace {

template <typename EvalDiff>
double holder_impl(double alpha, const std::vector<ProbePair>& pairs, EvalDiff&& diff) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::invalid_argument("holder_seminorm_estimate: alpha must be in (0,1]");
    double best = 0.0;
    for (const auto& p : pairs) {
        Vec d = p.x;
        for (size_t i = 0; i < d.size(); ++i) d[i] -= p.y[i];
        const double dist = norm2(d);
        if (dist < 1e-12) continue; // coincident probes carry no information
        best = std::max(best, diff(p) / std::pow(dist, alpha));
    }
    return best;
}

} // namespace

double holder_seminorm_estimate(const VectorField& v, double alpha,
                                const std::vector<ProbePair>& pairs, double t) {
    return holder_impl(alpha, pairs, [&](const ProbePair& p) {
        Vec d = v.eval(t, p.x);
        const Vec e = v.eval(t, p.y);
        for (size_t i = 0; i < d.size(); ++i) d[i] -= e[i];
        return norm2(d);
    });
}

double holder_seminorm_estimate(const KFormField& K, double alpha,
                                const std::vector<ProbePair>& pairs, double t) {
    return holder_impl(alpha, pairs, [&](const ProbePair& p) {
        Vec d = K.eval(t, p.x);
        const Vec e = K.eval(t, p.y);
        for (size_t i = 0; i < d.size(); ++i) d[i] -= e[i];
        return norm2(d);
    });
}

} // namespace klab
