#include "doctest.h"
#include "klab/counterexample.hpp"
#include "klab/calculus.hpp"

#include <cmath>
#include <stdexcept>

using namespace klab;

namespace {
const double kPi = 3.14159265358979323846;

HolderDrift half_drift(double R = 10.0) {
    HolderDrift hd;
    hd.alpha = 0.5;
    hd.R = R;
    hd.n = 2;
    return hd;
}
} // namespace

TEST_CASE("radius maps invert each other across all branches") {
    HolderDrift hd = half_drift(0.5); // small cutoff to force crossings
    for (double t : {0.2, 1.0, 3.0}) {
        for (double r0 : {0.05, 0.3, 0.45, 0.8, 2.0}) {
            double s = holder_radius_forward(hd, t, r0);
            CHECK(s > r0); // the drift always pushes outward
            CHECK(holder_radius_backward(hd, t, s) == doctest::Approx(r0).epsilon(1e-11));
        }
    }
}

TEST_CASE("radius map on the pure power branch") {
    // alpha = 1/2 below the cutoff: g_t(r0) = (sqrt(r0) + t)^2.
    HolderDrift hd = half_drift(10.0);
    double g = holder_radius_forward(hd, 0.7, 0.09);
    CHECK(g == doctest::Approx((0.3 + 0.7) * (0.3 + 0.7)).epsilon(1e-13));

    // Above the cutoff motion is linear at speed R^alpha/(1-alpha).
    HolderDrift far = half_drift(0.5);
    double speed = std::sqrt(0.5) / 0.5;
    CHECK(holder_radius_forward(far, 1.0, 2.0) ==
          doctest::Approx(2.0 + speed).epsilon(1e-13));
}

TEST_CASE("radius derivatives match finite differences") {
    HolderDrift hd = half_drift(0.5);
    const double h = 1e-6;
    for (double t : {0.4, 1.5}) {
        for (double r0 : {0.1, 0.35, 0.47, 0.9}) {
            double fd = (holder_radius_forward(hd, t, r0 + h) -
                         holder_radius_forward(hd, t, r0 - h)) / (2.0 * h);
            CHECK(holder_radius_forward_deriv(hd, t, r0) ==
                  doctest::Approx(fd).epsilon(1e-5));

            double s = holder_radius_forward(hd, t, r0);
            double fdb = (holder_radius_backward(hd, t, s + h) -
                          holder_radius_backward(hd, t, s - h)) / (2.0 * h);
            CHECK(holder_radius_backward_deriv(hd, t, s) ==
                  doctest::Approx(fdb).epsilon(1e-5));
        }
    }
}

TEST_CASE("ball radius tracks the origin characteristic") {
    HolderDrift hd = half_drift(10.0);
    // r*(t) = t^2 while below the cutoff.
    CHECK(holder_ball_radius(hd, 1.0) == doctest::Approx(1.0));
    CHECK(holder_ball_radius(hd, 0.5) == doctest::Approx(0.25));

    // With a small cutoff the edge eventually rides the linear branch.
    HolderDrift tight = half_drift(0.5);
    double tR = std::sqrt(0.5); // time to reach the cutoff from 0
    double speed = std::sqrt(0.5) / 0.5;
    CHECK(holder_ball_radius(tight, 1.0) ==
          doctest::Approx(0.5 + (1.0 - tR) * speed).epsilon(1e-12));
}

TEST_CASE("flow map and its jacobian agree with the drift") {
    HolderDrift hd = half_drift(10.0);
    VectorField b = holder_drift(hd.alpha, hd.R, hd.n);
    SampledDiffeo phi = holder_flow_map(hd, 0.8);

    // Forward map composed with inverse is the identity outside the ball.
    Vec x{1.1, -0.6};
    Vec y = phi.fwd(x);
    Vec back = phi.inv(y);
    CHECK(back[0] == doctest::Approx(x[0]).epsilon(1e-11));
    CHECK(back[1] == doctest::Approx(x[1]).epsilon(1e-11));

    // dfwd against finite differences of fwd.
    Mat J = phi.dfwd(x);
    const double h = 1e-6;
    for (int j = 0; j < 2; ++j) {
        Vec xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        Vec fp = phi.fwd(xp), fm = phi.fwd(xm);
        for (int i = 0; i < 2; ++i)
            CHECK(J(i, j) == doctest::Approx((fp[i] - fm[i]) / (2 * h)).epsilon(1e-4));
    }

    // The map solves dx/dt = b(x): check with a short-time step.
    const double dt = 1e-6;
    SampledDiffeo phit = holder_flow_map(hd, dt);
    Vec moved = phit.fwd(x);
    Vec bx = b.eval(0.0, x);
    CHECK((moved[0] - x[0]) / dt == doctest::Approx(bx[0]).epsilon(1e-4));
    CHECK((moved[1] - x[1]) / dt == doctest::Approx(bx[1]).epsilon(1e-4));
}

TEST_CASE("drift jacobian closure matches finite differences off the rays") {
    VectorField b = holder_drift(0.5, 0.75, 2);
    std::vector<Vec> probes{{0.3, 0.2}, {-0.5, 0.1}, {1.2, -0.9}};
    CHECK(jacobian_mismatch(b, 0.0, probes) < 1e-5);
}

TEST_CASE("origin characteristics and their inverse") {
    // alpha = 1/2: x_v(t) = v (t - t0)^2; through x = 0.25 e1 at t = 1 the
    // departure time is t0 = 1 - sqrt(0.25) = 0.5.
    T0Result r = t0_map(1.0, {0.25, 0.0}, 0.5);
    CHECK(r.t0 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.v[0] == doctest::Approx(1.0));
    CHECK(r.v[1] == doctest::Approx(0.0));

    Vec x = explicit_characteristics({1.0, 0.0}, 1.0, 0.5, 0.5);
    CHECK(x[0] == doctest::Approx(0.25).epsilon(1e-13));

    // Round trip through a generic point.
    Vec p{0.1, -0.07};
    T0Result rr = t0_map(0.9, p, 0.5);
    Vec again = explicit_characteristics(rr.v, 0.9, rr.t0, 0.5);
    CHECK(again[0] == doctest::Approx(p[0]).epsilon(1e-11));
    CHECK(again[1] == doctest::Approx(p[1]).epsilon(1e-11));

    // Before departure the characteristic sits at the origin.
    Vec still = explicit_characteristics({1.0, 0.0}, 0.3, 0.5, 0.5);
    CHECK(still[0] == 0.0);
}

TEST_CASE("t0_map rejects out-of-range queries") {
    CHECK_THROWS_AS(t0_map(1.0, {0.0, 0.0}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(t0_map(1.0, {1.5, 0.0}, 0.5), std::invalid_argument); // outside the ball
    CHECK_THROWS_AS(t0_map(1.0, {0.25, 0.0}, 1.5), std::invalid_argument);
}

TEST_CASE("characteristic position solves the ODE at second order") {
    // alpha = 0.6 keeps the trajectory non-polynomial so the finite
    // difference residual actually scales.
    const double alpha = 0.6;
    VectorField b = holder_drift(alpha, 10.0, 2);
    Vec v{1.0, 0.0};

    std::vector<double> hs{0.02, 0.01, 0.005, 0.0025};
    std::vector<double> res;
    for (double h : hs) {
        Vec xp = explicit_characteristics(v, 0.7 + h, 0.0, alpha);
        Vec xm = explicit_characteristics(v, 0.7 - h, 0.0, alpha);
        Vec xc = explicit_characteristics(v, 0.7, 0.0, alpha);
        Vec bx = b.eval(0.0, xc);
        double r = 0.0;
        for (int i = 0; i < 2; ++i)
            r = std::max(r, std::abs((xp[i] - xm[i]) / (2 * h) - bx[i]));
        res.push_back(r);
    }
    CHECK(loglog_slope(hs, res, 1e-16) > 1.9);
}

TEST_CASE("gamma selections take the advertised shapes") {
    KFormField K0(2, 0);
    K0.coeff[0] = trig_fn({0.4, 0.9}, 1.2, 0.7);
    GammaSelection matched = matched_gamma(K0);
    CHECK(matched.k == 0);
    Vec v = matched.value(0.3, {0.0, 1.0});
    CHECK(v[0] == doctest::Approx(K0.eval(0.0, {0.0, 0.0})[0]));

    KFormField K1 = constant_form(2, 1, {0.5, -0.5});
    GammaSelection m1 = matched_gamma(K1);
    Vec v1 = m1.value(0.2, {1.0, 0.0});
    CHECK(v1[0] == 0.0);
    CHECK(v1[1] == 0.0);

    GammaSelection c = constant_gamma(2, 0, {0.35});
    CHECK(c.value(0.9, {0.0, 1.0})[0] == doctest::Approx(0.35));
    CHECK_THROWS_AS(constant_gamma(2, 1, {1.0}), std::invalid_argument);
}

TEST_CASE("solution field forks inside the ball and transports outside") {
    HolderDrift hd = half_drift(10.0);
    KFormField K0(2, 0);
    K0.coeff[0] = trig_fn({0.8, -0.3}, 1.0, 0.4);
    const double t = 1.0;

    GammaSelection c = constant_gamma(2, 0, {0.35});
    KFormField u = nonunique_solution_field(c, K0, hd, t);

    // Inside the ball (radius 1 at t = 1) the constant selection shows.
    CHECK(u.eval(0.0, {0.2, 0.1})[0] == doctest::Approx(0.35));

    // Outside it is the closed-form pushforward; cross-check against the
    // generic pushforward machinery at a point.
    SampledDiffeo phi = holder_flow_map(hd, t);
    KFormField pushed = pushforward(phi, K0);
    Vec far{1.6, -0.9};
    CHECK(u.eval(0.0, far)[0] == doctest::Approx(pushed.eval(0.0, far)[0]).epsilon(1e-11));

    // The matched selection is continuous across the ball boundary.
    GammaSelection m = matched_gamma(K0);
    KFormField um = nonunique_solution_field(m, K0, hd, t);
    double rstar = holder_ball_radius(hd, t);
    double in = um.eval(0.0, {rstar - 1e-9, 0.0})[0];
    double out = um.eval(0.0, {rstar + 1e-9, 0.0})[0];
    CHECK(in == doctest::Approx(out).epsilon(1e-4));
}

TEST_CASE("higher-degree pushforward outside the ball matches the generic route") {
    HolderDrift hd = half_drift(10.0);
    KFormField K0(2, 1);
    K0.coeff[0] = trig_fn({0.5, 0.2}, 0.8, 0.1);
    K0.coeff[1] = trig_fn({-0.3, 0.7}, 0.6, 0.9);

    GammaSelection zero = constant_gamma(2, 1, {0.0, 0.0});
    KFormField u = nonunique_solution_field(zero, K0, hd, 0.8);
    SampledDiffeo phi = holder_flow_map(hd, 0.8);
    KFormField pushed = pushforward(phi, K0);

    Vec x{1.4, 0.8};
    Vec a = u.eval(0.0, x), b = pushed.eval(0.0, x);
    CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-10));
    CHECK(a[1] == doctest::Approx(b[1]).epsilon(1e-10));
}

TEST_CASE("ball volumes") {
    CHECK(ball_volume(2, 1.0) == doctest::Approx(kPi).epsilon(1e-12));
    CHECK(ball_volume(2, 0.5) == doctest::Approx(kPi * 0.25).epsilon(1e-12));
    CHECK(ball_volume(3, 1.0) == doctest::Approx(4.0 * kPi / 3.0).epsilon(1e-12));
}

TEST_CASE("polar pairing agrees with box quadrature on smooth fields") {
    KFormField u(2, 0);
    u.coeff[0] = trig_fn({0.9, 0.5}, 0.8, 0.2);
    TestForm theta = make_test_form(2, 0, 1.1, Vec{1.0});

    PolarQuad pq;
    pq.r_max = 1.3;
    pq.radial_nodes = 40;
    pq.angular_nodes = 80;
    double polar = polar_pairing(u, theta.form, 0.0, pq, {});

    QuadratureGrid grid = centered_box(2, 1.3, 40);
    double box = l2_pairing(u, theta.form, grid);
    CHECK(polar == doctest::Approx(box).epsilon(1e-8));
}

TEST_CASE("l2 distance of constant selections is exact") {
    HolderDrift hd = half_drift(10.0);
    KFormField K0(2, 0);
    K0.coeff[0] = constant_fn(0.0);
    const double t = 0.9;
    double rstar = holder_ball_radius(hd, t);

    GammaSelection a = constant_gamma(2, 0, {0.35}, "a");
    GammaSelection b = constant_gamma(2, 0, {-0.15}, "b");
    KFormField ua = nonunique_solution_field(a, K0, hd, t);
    KFormField ub = nonunique_solution_field(b, K0, hd, t);

    PolarQuad pq;
    pq.r_max = rstar;
    double dist = l2_distance_on_ball(ua, ub, t, rstar, pq, 2.0);
    double expect = 0.5 * std::sqrt(ball_volume(2, rstar));
    CHECK(dist == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("both selections satisfy the weak form on the window") {
    HolderDrift hd = half_drift(10.0);
    KFormField K0(2, 0);
    K0.coeff[0] = ScalarFn(
        [](double, const Vec& x) {
            double dx = x[0] - 1.2, dy = x[1] - 0.2;
            return std::exp(-(dx * dx + dy * dy) / (2.0 * 0.3 * 0.3));
        },
        [](double, const Vec& x) {
            double dx = x[0] - 1.2, dy = x[1] - 0.2;
            double g = std::exp(-(dx * dx + dy * dy) / (2.0 * 0.3 * 0.3));
            return Vec{-g * dx / (0.3 * 0.3), -g * dy / (0.3 * 0.3)};
        });
    TestForm theta = make_test_form(2, 0, 1.5, Vec{1.0});

    WeakWindowConfig w;
    w.quad.r_max = 2.0;
    w.quad.radial_nodes = 24;
    w.quad.angular_nodes = 48;

    for (GammaSelection g : {matched_gamma(K0), constant_gamma(2, 0, {0.35})}) {
        double res = selection_weak_residual(g, K0, hd, theta, w);
        // Scale of the pairing is order one here; the residual must sit far
        // below it.
        CHECK(res < 2e-3);
    }
}

TEST_CASE("weak residual window validation") {
    HolderDrift hd = half_drift(10.0);
    KFormField K0(2, 0);
    K0.coeff[0] = constant_fn(1.0);
    TestForm theta = make_test_form(2, 0, 1.5, Vec{1.0});

    WeakWindowConfig w;
    w.t1 = 5e-4; // dips below fd_dt of zero
    CHECK_THROWS_AS(selection_weak_residual(matched_gamma(K0), K0, hd, theta, w),
                    std::invalid_argument);
}

TEST_CASE("tampered smooth solution fails the residual check the genuine one passes") {
    WeakWindowConfig w;
    w.quad.r_max = 2.0;
    w.quad.radial_nodes = 24;
    w.quad.angular_nodes = 48;
    ControlCaseResult r = smooth_control_residuals(0.5, 0.4, w);
    CHECK(r.residual_tampered > 100.0 * r.residual_genuine);
    CHECK(r.residual_genuine < 1e-4);
}

TEST_CASE("noise selection experiment validates its configuration") {
    NoiseSelectionConfig cfg;
    cfg.eps_list = {0.2, 0.1};
    cfg.center_shift = {0.35, 0.0};
    PathSpec spec;
    spec.seed = 12;
    spec.n_drivers = 2;
    spec.horizon = 0.3;
    spec.base_steps = 16;

    // Degenerate noise with the assertion armed is refused outright.
    NoiseSelectionConfig degenerate = cfg;
    degenerate.xi_amplitude = 0.0;
    degenerate.assert_decreasing = true;
    CHECK_THROWS_AS(noise_selection_experiment(degenerate, spec, 2), std::invalid_argument);

    // Epsilon list must strictly decrease.
    NoiseSelectionConfig increasing = cfg;
    increasing.eps_list = {0.1, 0.2};
    CHECK_THROWS_AS(noise_selection_experiment(increasing, spec, 2), std::invalid_argument);

    // Driver count must match the dimension.
    PathSpec wrong = spec;
    wrong.n_drivers = 1;
    CHECK_THROWS_AS(noise_selection_experiment(cfg, wrong, 2), std::invalid_argument);
}

TEST_CASE("noise selection experiment produces finite coupled gaps") {
    NoiseSelectionConfig cfg;
    cfg.eps_list = {0.3, 0.15, 0.075};
    cfg.center_shift = {0.35, 0.0};
    cfg.mollify_nodes = 10;

    PathSpec spec;
    spec.seed = 33;
    spec.n_drivers = 2;
    spec.horizon = 0.4;
    spec.base_steps = 32;

    ConvergenceReport rep = noise_selection_experiment(cfg, spec, 4);
    REQUIRE(rep.entries.size() == 2);
    for (const auto& e : rep.entries) {
        CHECK(std::isfinite(e.error));
        CHECK(e.error >= 0.0);
        CHECK(std::isfinite(e.aux));
    }
}
