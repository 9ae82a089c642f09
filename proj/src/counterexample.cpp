#include "klab/counterexample.hpp"

#include "klab/calculus.hpp"
#include "klab/flow.hpp"
#include "klab/mollifier.hpp"
#include "klab/multi_index.hpp"
#include "klab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace klab {

namespace {

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("holder drift: alpha must lie in (0,1)");
}

void check_hd(const HolderDrift& hd) {
    check_alpha(hd.alpha);
    if (!(hd.R > 0.0)) throw std::invalid_argument("holder drift: cutoff radius must be positive");
    if (hd.n < 1) throw std::invalid_argument("holder drift: dimension must be at least 1");
}

double cap_speed(const HolderDrift& hd) {
    return std::pow(hd.R, hd.alpha) / (1.0 - hd.alpha);
}

// Time for a characteristic started at the origin to reach radius s.
double time_to_radius(const HolderDrift& hd, double s) {
    const double om = 1.0 - hd.alpha;
    if (s <= hd.R) return std::pow(s, om);
    return std::pow(hd.R, om) + (s - hd.R) / cap_speed(hd);
}

// Map x -> f(|x|) * x/|x| together with its Jacobian
// (f/s)(I - xx^T/s^2) + f'(s) xx^T/s^2.
SampledDiffeo radial_diffeo(int n, std::function<double(double)> f,
                            std::function<double(double)> fp,
                            std::function<double(double)> g,
                            std::function<double(double)> gp) {
    auto apply = [n](const std::function<double(double)>& h, const Vec& x) {
        double s = norm2(x);
        Vec out(n, 0.0);
        if (s == 0.0) return out;
        double r = h(s);
        for (int i = 0; i < n; ++i) out[i] = x[i] * (r / s);
        return out;
    };
    auto jac = [n](const std::function<double(double)>& h,
                   const std::function<double(double)>& hp, const Vec& x) {
        double s = norm2(x);
        if (s == 0.0) throw std::domain_error("radial map jacobian requested at the origin");
        double r = h(s), rp = hp(s);
        Mat out(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double proj = x[i] * x[j] / (s * s);
                out(i, j) = (i == j ? r / s : 0.0) + (rp - r / s) * proj;
            }
        return out;
    };
    SampledDiffeo d;
    d.n = n;
    d.fwd = [=](const Vec& x) { return apply(f, x); };
    d.inv = [=](const Vec& x) { return apply(g, x); };
    d.dfwd = [=](const Vec& x) { return jac(f, fp, x); };
    d.dinv = [=](const Vec& x) { return jac(g, gp, x); };
    return d;
}

}  // namespace

VectorField holder_drift(double alpha, double R, int n) {
    HolderDrift hd{alpha, R, n};
    check_hd(hd);
    const double c1 = 1.0 / (1.0 - alpha);
    VectorField b(n);
    b.label = "radial-holder";
    for (int i = 0; i < n; ++i) {
        auto val = [=](double, const Vec& x) {
            double s = norm2(x);
            if (s == 0.0) return 0.0;
            return x[i] / s * c1 * std::pow(std::min(s, R), alpha);
        };
        auto grad = [=](double, const Vec& x) {
            // row i of the jacobian; analytic away from 0 and the cutoff
            // sphere, zero at the origin (b is only C^alpha there)
            Vec g(n, 0.0);
            double s = norm2(x);
            if (s == 0.0) return g;
            if (s < R) {
                double sa1 = std::pow(s, alpha - 1.0);
                for (int j = 0; j < n; ++j) {
                    double t = (i == j) ? sa1 : 0.0;
                    t += (alpha - 1.0) * sa1 * x[i] * x[j] / (s * s);
                    g[j] = c1 * t;
                }
            } else {
                double pref = c1 * std::pow(R, alpha);
                for (int j = 0; j < n; ++j)
                    g[j] = pref * ((i == j ? 1.0 : 0.0) / s - x[i] * x[j] / (s * s * s));
            }
            return g;
        };
        b.comp[i] = ScalarFn(val, grad);
    }
    return b;
}

double holder_ball_radius(const HolderDrift& hd, double t) {
    check_hd(hd);
    if (t <= 0.0) return 0.0;
    const double om = 1.0 - hd.alpha;
    double tR = std::pow(hd.R, om);
    if (t <= tR) return std::pow(t, 1.0 / om);
    return hd.R + (t - tR) * cap_speed(hd);
}

double holder_radius_forward(const HolderDrift& hd, double t, double r0) {
    check_hd(hd);
    if (r0 < 0.0) throw std::invalid_argument("radius map: negative radius");
    const double om = 1.0 - hd.alpha;
    if (r0 >= hd.R) return r0 + t * cap_speed(hd);
    double w = std::pow(r0, om) + t;
    double wR = std::pow(hd.R, om);
    if (w <= wR) return std::pow(w, 1.0 / om);
    return hd.R + (w - wR) * cap_speed(hd);
}

double holder_radius_forward_deriv(const HolderDrift& hd, double t, double r0) {
    check_hd(hd);
    if (r0 <= 0.0) throw std::domain_error("radius map derivative: needs r0 > 0");
    const double om = 1.0 - hd.alpha;
    if (r0 >= hd.R) return 1.0;
    double w = std::pow(r0, om) + t;
    double wR = std::pow(hd.R, om);
    double ra = std::pow(r0, hd.alpha);
    if (w <= wR) {
        double g = std::pow(w, 1.0 / om);
        return std::pow(g, hd.alpha) / ra;
    }
    return std::pow(hd.R, hd.alpha) / ra;
}

double holder_radius_backward(const HolderDrift& hd, double t, double s) {
    check_hd(hd);
    if (s < 0.0) throw std::invalid_argument("radius map: negative radius");
    const double om = 1.0 - hd.alpha;
    if (s <= hd.R) {
        double w = std::pow(s, om) - t;
        return w > 0.0 ? std::pow(w, 1.0 / om) : 0.0;
    }
    double tau = (s - hd.R) / cap_speed(hd);
    if (t <= tau) return s - t * cap_speed(hd);
    double w = std::pow(hd.R, om) - (t - tau);
    return w > 0.0 ? std::pow(w, 1.0 / om) : 0.0;
}

double holder_radius_backward_deriv(const HolderDrift& hd, double t, double s) {
    check_hd(hd);
    double h = holder_radius_backward(hd, t, s);
    if (h <= 0.0)
        throw std::domain_error("radius map derivative: point is inside the swept ball");
    if (s <= hd.R) return std::pow(h / s, hd.alpha);  // h^alpha / s^alpha
    double tau = (s - hd.R) / cap_speed(hd);
    if (t <= tau) return 1.0;
    return std::pow(h / hd.R, hd.alpha);
}

SampledDiffeo holder_flow_map(const HolderDrift& hd, double t) {
    check_hd(hd);
    HolderDrift h = hd;
    auto f = [h, t](double r0) { return holder_radius_forward(h, t, r0); };
    auto fp = [h, t](double r0) { return holder_radius_forward_deriv(h, t, r0); };
    auto g = [h, t](double s) { return holder_radius_backward(h, t, s); };
    auto gp = [h, t](double s) { return holder_radius_backward_deriv(h, t, s); };
    return radial_diffeo(hd.n, f, fp, g, gp);
}

Vec explicit_characteristics(const Vec& v, double t, double t0, double alpha) {
    check_alpha(alpha);
    int n = static_cast<int>(v.size());
    Vec x(n, 0.0);
    if (t <= t0) return x;  // still parked at the origin
    double r = std::pow(t - t0, 1.0 / (1.0 - alpha));
    for (int i = 0; i < n; ++i) x[i] = v[i] * r;
    return x;
}

T0Result t0_map(double t, const Vec& x, double alpha) {
    check_alpha(alpha);
    double s = norm2(x);
    if (s == 0.0)
        throw std::invalid_argument("t0_map: x is the origin; every departure time matches");
    const double om = 1.0 - alpha;
    double rstar = std::pow(std::max(t, 0.0), 1.0 / om);
    if (s > rstar * (1.0 + 1e-12))
        throw std::invalid_argument("t0_map: x lies outside the ball reachable from the origin");
    T0Result out;
    out.t0 = std::max(0.0, t - std::pow(s, om));
    out.v = Vec(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out.v[i] = x[i] / s;
    return out;
}

GammaSelection matched_gamma(const KFormField& K0) {
    GammaSelection g;
    g.n = K0.n;
    g.k = K0.k;
    g.label = "matched";
    int C = K0.channels();
    if (K0.k == 0) {
        Vec origin(K0.n, 0.0);
        Vec c = {K0.coeff[0].value(0.0, origin)};
        g.bound = std::fabs(c[0]);
        g.value = [c](double, const Vec&) { return c; };
    } else {
        // The backward jacobian degenerates at the ball boundary, so every
        // minor vanishes in the limit; only zero matches continuously.
        Vec c(C, 0.0);
        g.bound = 0.0;
        g.value = [c](double, const Vec&) { return c; };
    }
    return g;
}

GammaSelection constant_gamma(int n, int k, const Vec& c, std::string label) {
    if (static_cast<int>(c.size()) != binomial(n, k))
        throw std::invalid_argument("constant_gamma: channel count does not match C(n,k)");
    GammaSelection g;
    g.n = n;
    g.k = k;
    g.label = std::move(label);
    g.bound = norm_inf(c);
    g.value = [c](double, const Vec&) { return c; };
    return g;
}

Vec nonunique_solution_value(const GammaSelection& g, const KFormField& K0,
                             const HolderDrift& hd, double t, const Vec& x) {
    check_hd(hd);
    if (g.n != hd.n || K0.n != hd.n || g.k != K0.k)
        throw std::invalid_argument("nonunique_solution: selection/initial data shape mismatch");
    double s = norm2(x);
    double rstar = holder_ball_radius(hd, t);
    if (s < rstar) {
        double t0 = t - time_to_radius(hd, s);
        Vec v(hd.n, 0.0);
        if (s > 0.0)
            for (int i = 0; i < hd.n; ++i) v[i] = x[i] / s;
        else
            v[0] = 1.0;  // measure-zero point; any direction serves
        return g.value(std::max(0.0, t0), v);
    }
    // Outside: genuine pushforward along the closed-form backward map.
    int C = K0.channels();
    Vec out(C, 0.0);
    if (s == 0.0) {  // only possible when rstar == 0, i.e. t <= 0
        for (int r = 0; r < C; ++r) out[r] = K0.coeff[r].value(0.0, x);
        return out;
    }
    double h = holder_radius_backward(hd, t, s);
    Vec psi(hd.n);
    for (int i = 0; i < hd.n; ++i) psi[i] = x[i] * (h / s);
    if (K0.k == 0) {
        out[0] = K0.coeff[0].value(0.0, psi);
        return out;
    }
    double hp = (h > 0.0) ? holder_radius_backward_deriv(hd, t, s) : 0.0;
    Mat Dpsi(hd.n);
    for (int i = 0; i < hd.n; ++i)
        for (int j = 0; j < hd.n; ++j) {
            double proj = x[i] * x[j] / (s * s);
            Dpsi(i, j) = (i == j ? h / s : 0.0) + (hp - h / s) * proj;
        }
    const MultiIndexSet& idx = K0.idx;
    std::vector<std::vector<int>> tup(C);
    for (int r = 0; r < C; ++r) tup[r] = idx[r];
    for (int rj = 0; rj < C; ++rj) {
        double acc = 0.0;
        for (int ri = 0; ri < C; ++ri) {
            double kv = K0.coeff[ri].value(0.0, psi);
            if (kv == 0.0) continue;
            acc += kv * minor_det(Dpsi, tup[ri], tup[rj]);
        }
        out[rj] = acc;
    }
    return out;
}

KFormField nonunique_solution_field(const GammaSelection& g, const KFormField& K0,
                                    const HolderDrift& hd, double t) {
    KFormField u = zero_form(hd.n, K0.k);
    int C = u.channels();
    // Channels are usually polled together at one point; a one-slot cache
    // turns that into a single closed-form evaluation.
    struct Cache {
        Vec x, val;
        bool full = false;
    };
    auto cache = std::make_shared<Cache>();
    GammaSelection gc = g;
    KFormField K0c = K0;
    HolderDrift hdc = hd;
    for (int r = 0; r < C; ++r) {
        u.coeff[r] = ScalarFn([cache, gc, K0c, hdc, t, r](double, const Vec& x) {
            if (!cache->full || cache->x != x) {
                cache->val = nonunique_solution_value(gc, K0c, hdc, t, x);
                cache->x = x;
                cache->full = true;
            }
            return cache->val[r];
        });
    }
    return u;
}

namespace {

struct PolarNode {
    Vec x;
    double w = 0.0;  // includes the polar r factor and panel jacobian
};

// Radial panels between the sorted split radii; the innermost panel is
// reparameterised as r = r1 * tau^grade so kinks of the form r^{1-alpha}
// become polynomial in tau.
std::vector<PolarNode> polar_nodes(const PolarQuad& pq, const Vec& split_radii,
                                   double inner_grade) {
    if (!(pq.r_max > 0.0) || pq.radial_nodes < 2 || pq.angular_nodes < 4)
        throw std::invalid_argument("polar quadrature: degenerate node counts or radius");
    Vec bounds;
    for (double r : split_radii)
        if (r > 1e-14 && r < pq.r_max * (1.0 - 1e-14)) bounds.push_back(r);
    std::sort(bounds.begin(), bounds.end());
    bounds.erase(std::unique(bounds.begin(), bounds.end(),
                             [](double a, double b) { return std::fabs(a - b) < 1e-13; }),
                 bounds.end());
    bounds.insert(bounds.begin(), 0.0);
    bounds.push_back(pq.r_max);

    std::vector<double> gx, gw;
    gauss_legendre(pq.radial_nodes, gx, gw);

    std::vector<PolarNode> nodes;
    nodes.reserve((bounds.size() - 1) * gx.size() * pq.angular_nodes);
    const double dphi = 2.0 * M_PI / pq.angular_nodes;
    for (std::size_t p = 0; p + 1 < bounds.size(); ++p) {
        double lo = bounds[p], hi = bounds[p + 1];
        for (std::size_t q = 0; q < gx.size(); ++q) {
            double r, jac;
            if (p == 0 && inner_grade > 1.0) {
                double tau = 0.5 * (gx[q] + 1.0);
                r = hi * std::pow(tau, inner_grade);
                jac = hi * inner_grade * std::pow(tau, inner_grade - 1.0) * 0.5 * gw[q];
            } else {
                r = 0.5 * (hi - lo) * gx[q] + 0.5 * (hi + lo);
                jac = 0.5 * (hi - lo) * gw[q];
            }
            if (r <= 0.0) continue;
            for (int a = 0; a < pq.angular_nodes; ++a) {
                double phi = dphi * a;
                PolarNode nd;
                nd.x = {r * std::cos(phi), r * std::sin(phi)};
                nd.w = jac * dphi * r;
                nodes.push_back(std::move(nd));
            }
        }
    }
    return nodes;
}

}  // namespace

double polar_pairing(const KFormField& u, const KFormField& eta, double t,
                     const PolarQuad& pq, const Vec& split_radii, double inner_grade) {
    if (u.n != 2 || eta.n != 2)
        throw std::invalid_argument("polar_pairing: only implemented in dimension 2");
    if (u.k != eta.k) throw std::invalid_argument("polar_pairing: degree mismatch");
    double acc = 0.0;
    for (const PolarNode& nd : polar_nodes(pq, split_radii, inner_grade)) {
        Vec a = u.eval(t, nd.x);
        Vec b = eta.eval(t, nd.x);
        double dot = 0.0;
        for (std::size_t c = 0; c < a.size(); ++c) dot += a[c] * b[c];
        acc += nd.w * dot;
    }
    return acc;
}

double l2_distance_on_ball(const KFormField& u1, const KFormField& u2, double t,
                           double radius, const PolarQuad& pq, double inner_grade) {
    if (u1.n != 2 || u2.n != 2)
        throw std::invalid_argument("l2_distance_on_ball: only implemented in dimension 2");
    PolarQuad inner = pq;
    inner.r_max = radius;
    double acc = 0.0;
    for (const PolarNode& nd : polar_nodes(inner, Vec(), inner_grade)) {
        Vec a = u1.eval(t, nd.x);
        Vec b = u2.eval(t, nd.x);
        double sq = 0.0;
        for (std::size_t c = 0; c < a.size(); ++c) {
            double d = a[c] - b[c];
            sq += d * d;
        }
        acc += nd.w * sq;
    }
    return std::sqrt(acc);
}

double ball_volume(int n, double radius) {
    // pi^{n/2} / Gamma(n/2 + 1) * r^n
    double logv = 0.5 * n * std::log(M_PI) - std::lgamma(0.5 * n + 1.0);
    return std::exp(logv) * std::pow(radius, n);
}

double deterministic_weak_residual(const std::function<KFormField(double)>& u_of_t,
                                   const VectorField& b,
                                   const std::function<Vec(double)>& split_radii_at,
                                   double inner_grade, const TestForm& theta,
                                   const WeakWindowConfig& cfg) {
    if (cfg.t1 - cfg.fd_dt <= 0.0)
        throw std::invalid_argument(
            "weak residual window reaches into the initial layer; "
            "start it at least one finite-difference step above 0");
    if (cfg.t2 < cfg.t1 || cfg.time_samples < 1)
        throw std::invalid_argument("weak residual window is empty");
    if (cfg.quad.r_max < theta.radius)
        throw std::invalid_argument("weak residual: quadrature radius misses the test support");
    KFormField adj = lie_derivative_adjoint(b, theta.form);
    double worst = 0.0;
    for (int i = 0; i < cfg.time_samples; ++i) {
        double t = (cfg.time_samples == 1)
                       ? cfg.t1
                       : cfg.t1 + (cfg.t2 - cfg.t1) * i / (cfg.time_samples - 1);
        auto pair_at = [&](double s, const KFormField& eta) {
            KFormField u = u_of_t(s);
            return polar_pairing(u, eta, s, cfg.quad, split_radii_at(s), inner_grade);
        };
        double ep = pair_at(t + cfg.fd_dt, theta.form);
        double em = pair_at(t - cfg.fd_dt, theta.form);
        double dpair = (ep - em) / (2.0 * cfg.fd_dt);
        double drift = pair_at(t, adj);
        worst = std::max(worst, std::fabs(dpair + drift));
    }
    return worst;
}

double selection_weak_residual(const GammaSelection& g, const KFormField& K0,
                               const HolderDrift& hd, const TestForm& theta,
                               const WeakWindowConfig& cfg) {
    check_hd(hd);
    if (hd.n != 2)
        throw std::invalid_argument("selection_weak_residual: polar quadrature needs n = 2");
    VectorField b = holder_drift(hd.alpha, hd.R, hd.n);
    double grade = 1.0 / (1.0 - hd.alpha);
    auto u_of_t = [&](double t) { return nonunique_solution_field(g, K0, hd, t); };
    auto splits = [&](double t) {
        Vec s = {holder_ball_radius(hd, t)};
        if (hd.R < cfg.quad.r_max) s.push_back(hd.R);
        return s;
    };
    return deterministic_weak_residual(u_of_t, b, splits, grade, theta, cfg);
}

ControlCaseResult smooth_control_residuals(double fake_radius, double tamper_value,
                                           const WeakWindowConfig& cfg) {
    // Linear solvable drift: rigid rotation plus a gentle contraction, flow
    // e^{tA} in closed form. The genuine transported scalar passes the same
    // residual gauge that the tampered field (ball overwritten by a
    // constant) fails, which is what makes the gauge falsifiable.
    const double omega = 0.7, lam = -0.15;
    Mat A(2);
    A(0, 0) = lam; A(0, 1) = -omega;
    A(1, 0) = omega; A(1, 1) = lam;
    VectorField b = linear_vf(A, Vec(2, 0.0));
    b.label = "rotation-contraction";
    ScalarFn u0 = trig_fn({1.3, -0.8}, 0.9, 0.4);
    auto backward = [=](double t, const Vec& x) {
        double ct = std::cos(omega * t), st = std::sin(omega * t);
        double damp = std::exp(-lam * t);
        return Vec{damp * (ct * x[0] + st * x[1]), damp * (-st * x[0] + ct * x[1])};
    };
    auto genuine_at = [&](double t) {
        KFormField u = zero_form(2, 0);
        u.coeff[0] = ScalarFn([=](double, const Vec& x) { return u0.value(0.0, backward(t, x)); });
        return u;
    };
    auto tampered_at = [&](double t) {
        KFormField u = zero_form(2, 0);
        u.coeff[0] = ScalarFn([=](double, const Vec& x) {
            if (norm2(x) < fake_radius) return tamper_value;
            return u0.value(0.0, backward(t, x));
        });
        return u;
    };
    TestForm theta = make_test_form(2, 0, 0.85 * cfg.quad.r_max, Vec{1.0});
    auto splits = [&](double) { return Vec{fake_radius}; };
    ControlCaseResult out;
    out.residual_genuine = deterministic_weak_residual(genuine_at, b, splits, 1.0, theta, cfg);
    out.residual_tampered = deterministic_weak_residual(tampered_at, b, splits, 1.0, theta, cfg);
    return out;
}

ConvergenceReport noise_selection_experiment(const NoiseSelectionConfig& cfg,
                                             const PathSpec& spec, int n_paths) {
    check_alpha(cfg.alpha);
    if (cfg.eps_list.size() < 2)
        throw std::invalid_argument("noise selection: need at least two mollification widths");
    for (std::size_t i = 0; i + 1 < cfg.eps_list.size(); ++i)
        if (!(cfg.eps_list[i + 1] < cfg.eps_list[i]))
            throw std::invalid_argument("noise selection: widths must decrease strictly");
    if (cfg.assert_decreasing && cfg.xi_amplitude == 0.0)
        throw std::invalid_argument(
            "noise selection: zero noise amplitude cannot select a branch; "
            "drop assert_decreasing or set an amplitude");
    if (spec.n_drivers != cfg.n)
        throw std::invalid_argument("noise selection: one driver per coordinate is required");
    if (n_paths < 1) throw std::invalid_argument("noise selection: need at least one path");

    VectorField b = holder_drift(cfg.alpha, cfg.R, cfg.n);
    std::vector<VectorField> xis;
    for (int i = 0; i < cfg.n; ++i) {
        Vec e(cfg.n, 0.0);
        e[i] = cfg.xi_amplitude;
        xis.push_back(constant_vf(e));
    }
    Vec x0 = cfg.x0.empty() ? Vec(cfg.n, 0.0) : cfg.x0;

    BrownianPaths on = generate_paths(spec.n_drivers, spec.horizon, spec.base_steps,
                                      spec.level, spec.seed, n_paths, spec.zero_variance);
    BrownianPaths off = generate_paths(spec.n_drivers, spec.horizon, spec.base_steps,
                                       spec.level, spec.seed, 1, true);

    FlowOptions opt;
    opt.with_jacobian = false;
    auto run_member = [&](double eps, int member, const BrownianPaths& paths) {
        Vec shift = cfg.center_shift;
        if (!shift.empty() && member % 2 == 1)
            for (double& c : shift) c = -c;
        Mollifier m = make_mollifier(cfg.n, eps, cfg.mollify_nodes, shift);
        VectorField be = mollify_vf(b, m);
        return integrate_flow(be, xis, paths, {x0}, opt);
    };
    auto gap = [&](const FlowEnsemble& a, const FlowEnsemble& c) {
        double mean = 0.0;
        int counted = 0;
        for (int p = 0; p < a.n_paths(); ++p) {
            if (!a.tracks[p][0].ok || !c.tracks[p][0].ok) continue;
            double sup = 0.0;
            for (int j = 0; j <= a.steps; ++j) {
                Vec xa = a.position(p, 0, j);
                Vec xc = c.position(p, 0, j);
                double d = 0.0;
                for (int i = 0; i < a.n; ++i) d += (xa[i] - xc[i]) * (xa[i] - xc[i]);
                sup = std::max(sup, std::sqrt(d));
            }
            mean += sup;
            ++counted;
        }
        if (counted == 0) throw std::runtime_error("noise selection: every coupled path failed");
        return mean / counted;
    };

    int M = static_cast<int>(cfg.eps_list.size());
    std::vector<FlowEnsemble> ens_on, ens_off;
    for (int i = 0; i < M; ++i) {
        ens_on.push_back(run_member(cfg.eps_list[i], i, on));
        ens_off.push_back(run_member(cfg.eps_list[i], i, off));
    }

    ConvergenceReport rep;
    rep.name = "noise_selection_experiment";
    rep.parameter_label = "epsilon";
    rep.error_label = "coupled_gap_noise";
    rep.aux_label = "coupled_gap_zero_noise";
    for (int i = 0; i + 1 < M; ++i)
        rep.add(cfg.eps_list[i], gap(ens_on[i], ens_on[i + 1]), gap(ens_off[i], ens_off[i + 1]));
    if (cfg.assert_decreasing && !rep.decreasing_trend())
        throw std::runtime_error("noise selection: coupled gaps failed to contract with noise on");
    return rep;
}

}  // namespace klab
