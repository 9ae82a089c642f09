#include "doctest.h"
#include "klab/flow.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

using namespace klab;

namespace {

VectorField scalar_linear(double a) {
    Mat A(1);
    A(0, 0) = a;
    return linear_vf(A, Vec(1, 0.0));
}

VectorField zero_vf(int n) { return constant_vf(Vec(n, 0.0)); }

double fit_rate(const std::vector<double>& dts, const std::vector<double>& errs) {
    return loglog_slope(dts, errs, 1e-15);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("geometric noise integrates to the exponential of the path") {
    // dX = X o dW has the closed solution x0 * exp(W_t); strong error of the
    // midpoint scheme contracts at first order in dt.
    VectorField b = zero_vf(1);
    std::vector<VectorField> xis{scalar_linear(1.0)};
    std::vector<Vec> x0s{Vec{1.0}};

    std::vector<double> dts, errs_heun, errs_ito;
    for (int level : {0, 2, 4}) {
        BrownianPaths paths = generate_paths(1, 1.0, 16, level, 404, 32);
        FlowOptions heun;
        heun.with_jacobian = false;
        FlowEnsemble eh = integrate_flow(b, xis, paths, x0s, heun);

        FlowOptions ito = heun;
        ito.scheme = SdeScheme::ItoEulerCorrected;
        FlowEnsemble ei = integrate_flow(b, xis, paths, x0s, ito);

        double acc_h = 0.0, acc_i = 0.0;
        for (int p = 0; p < paths.n_paths; ++p) {
            double wT = brownian_path(paths.spec, p, 0).back();
            double exact = std::exp(wT);
            acc_h += std::abs(eh.position(p, 0, eh.steps)[0] - exact);
            acc_i += std::abs(ei.position(p, 0, ei.steps)[0] - exact);
        }
        dts.push_back(paths.spec.dt());
        errs_heun.push_back(acc_h / paths.n_paths);
        errs_ito.push_back(acc_i / paths.n_paths);
    }
    CHECK(fit_rate(dts, errs_heun) > 0.85);
    // The corrected Euler scheme solves the same Stratonovich equation.
    CHECK(fit_rate(dts, errs_ito) > 0.7);
    CHECK(errs_heun.back() < 1e-2);
}

TEST_CASE("additive noise is integrated exactly") {
    VectorField b = constant_vf({0.3, -0.2});
    std::vector<VectorField> xis{constant_vf({1.0, 0.0}), constant_vf({0.0, 0.5})};
    std::vector<Vec> x0s{Vec{0.1, 0.2}};

    BrownianPaths paths = generate_paths(2, 1.0, 16, 0, 11, 4);
    for (SdeScheme scheme : {SdeScheme::StratonovichHeun, SdeScheme::ItoEulerCorrected}) {
        FlowOptions opt;
        opt.scheme = scheme;
        opt.with_jacobian = false;
        FlowEnsemble e = integrate_flow(b, xis, paths, x0s, opt);
        for (int p = 0; p < paths.n_paths; ++p) {
            double w0 = brownian_path(paths.spec, p, 0).back();
            double w1 = brownian_path(paths.spec, p, 1).back();
            Vec xe{0.1 + 0.3 + w0, 0.2 - 0.2 + 0.5 * w1};
            Vec got = e.position(p, 0, e.steps);
            CHECK(std::abs(got[0] - xe[0]) < 1e-12);
            CHECK(std::abs(got[1] - xe[1]) < 1e-12);
        }
    }
}

TEST_CASE("deterministic linear flow carries the exact jacobian") {
    // b = A x with a rotation generator: D phi_T = exp(A T), det = 1.
    Mat A(2);
    A(0, 1) = -1.0;
    A(1, 0) = 1.0;
    VectorField b = linear_vf(A, Vec(2, 0.0));

    BrownianPaths paths = generate_paths(0, 1.0, 256, 0, 1, 1, true);
    FlowEnsemble e = integrate_flow(b, {}, paths, {Vec{0.7, -0.1}});
    REQUIRE(e.has_jacobians());

    Mat D = e.jacobian(0, 0, e.steps);
    CHECK(D(0, 0) == doctest::Approx(std::cos(1.0)).epsilon(5e-5));
    CHECK(D(0, 1) == doctest::Approx(-std::sin(1.0)).epsilon(5e-5));
    CHECK(D(1, 0) == doctest::Approx(std::sin(1.0)).epsilon(5e-5));
    CHECK(e.determinant(0, 0, e.steps) == doctest::Approx(1.0).epsilon(1e-6));

    // Positions rotate the start point.
    Vec xT = e.position(0, 0, e.steps);
    CHECK(xT[0] == doctest::Approx(0.7 * std::cos(1.0) + 0.1 * std::sin(1.0)).epsilon(1e-4));
}

TEST_CASE("backward flow undoes the forward flow at first order") {
    VectorField b(2);
    b.comp[0] = trig_fn({0.8, 0.5}, 0.4, 0.1);
    b.comp[1] = trig_fn({-0.4, 0.9}, 0.3, 0.7);
    std::vector<VectorField> xis{constant_vf({0.25, 0.1})};
    std::vector<Vec> x0s{Vec{0.2, -0.3}, Vec{-0.4, 0.1}};

    std::vector<double> dts, errs;
    for (int level : {0, 2, 4}) {
        double worst = 0.0;
        for (std::uint64_t seed : {21u, 22u, 23u}) {
            BrownianPaths paths = generate_paths(1, 0.8, 16, level, seed, 1);
            FlowOptions opt;
            opt.with_jacobian = false;
            FlowEnsemble fwd = integrate_flow(b, xis, paths, x0s, opt);
            std::vector<Vec> ends;
            for (int q = 0; q < fwd.n_points(); ++q) ends.push_back(fwd.position(0, q, fwd.steps));
            FlowEnsemble back = integrate_backward_flow(b, xis, paths, ends, opt);
            for (int q = 0; q < back.n_points(); ++q)
                worst = std::max(worst, norm2(back.position(0, q, back.steps) - x0s[q]));
        }
        dts.push_back(0.8 / (16 << level));
        errs.push_back(worst);
    }
    CHECK(fit_rate(dts, errs) > 0.8);
    CHECK(errs.back() < 1e-3);
}

TEST_CASE("jacobian moments of a deterministic diagonal flow") {
    Mat A(2);
    A(0, 0) = 0.3;
    A(1, 1) = -0.2;
    VectorField b = linear_vf(A, Vec(2, 0.0));

    BrownianPaths paths = generate_paths(0, 1.0, 128, 0, 3, 4, true);
    FlowEnsemble e = integrate_flow(b, {}, paths, {Vec{0.0, 0.0}, Vec{0.5, 0.5}});

    // |D(t)|_F^2 = e^{2 a1 t} + e^{2 a2 t}, maximal at t = 1.
    double expect = std::exp(0.6) + std::exp(-0.4);
    MomentEstimate m2 = jacobian_moments(e, 2.0);
    CHECK(m2.value == doctest::Approx(expect).epsilon(1e-3));
    CHECK(m2.std_error < 1e-10);

    MomentEstimate m4 = jacobian_moments(e, 4.0);
    CHECK(m4.value == doctest::Approx(expect * expect).epsilon(1e-3));
}

TEST_CASE("blow-up trips the failure policy") {
    VectorField b(1);
    b.comp[0] = ScalarFn([](double, const Vec& x) { return x[0] * x[0] * x[0]; });

    BrownianPaths paths = generate_paths(0, 1.0, 64, 0, 5, 1, true);
    FlowOptions opt;
    opt.with_jacobian = false;
    FlowEnsemble e = integrate_flow(b, {}, paths, {Vec{2.5}}, opt);

    CHECK(e.failed_count() == 1);
    CHECK_FALSE(e.tracks[0][0].ok);
    CHECK(e.tracks[0][0].fail_step >= 0);
    CHECK_THROWS_AS(require_failure_rate_ok(e), std::runtime_error);

    // Healthy ensembles pass through silently.
    BrownianPaths tame = generate_paths(0, 1.0, 16, 0, 5, 1, true);
    FlowEnsemble ok = integrate_flow(constant_vf(Vec{0.1}), {}, tame, {Vec{0.0}}, opt);
    CHECK_NOTHROW(require_failure_rate_ok(ok));
}

TEST_CASE("drift sweeps contract toward the reference member") {
    VectorField base(2);
    base.comp[0] = trig_fn({0.7, 0.3}, 0.5, 0.0);
    base.comp[1] = trig_fn({-0.2, 0.8}, 0.4, 0.5);

    VectorField wobble(2);
    wobble.comp[0] = trig_fn({1.3, -0.9}, 1.0, 0.2);
    wobble.comp[1] = trig_fn({0.6, 1.1}, 1.0, 0.9);

    std::vector<VectorField> seq;
    for (double a : {0.4, 0.2, 0.1, 0.05}) seq.push_back(add(base, scale(a, wobble)));
    seq.push_back(base);

    std::vector<VectorField> xis{constant_vf({0.2, 0.15})};
    BrownianPaths paths = generate_paths(1, 0.75, 64, 0, 31, 16);
    std::vector<Vec> x0s{Vec{0.0, 0.0}, Vec{0.3, -0.2}};

    ConvergenceReport rep = flow_convergence_sweep(seq, xis, paths, x0s, 2.0);
    REQUIRE(rep.entries.size() == 4);
    CHECK(rep.decreasing_trend());
    CHECK(rep.last_error() < rep.first_error());

    CHECK_THROWS_AS(flow_convergence_sweep({base, base}, xis, paths, x0s, 2.0),
                    std::invalid_argument);
}

TEST_CASE("scheme consistency for additive noise") {
    // With constant noise fields the two schemes solve the same equation and
    // differ only through the O(dt) drift discretization.
    VectorField b(2);
    b.comp[0] = trig_fn({1.1, 0.4}, 0.6, 0.3);
    b.comp[1] = trig_fn({0.5, -0.8}, 0.7, 0.1);
    std::vector<VectorField> xis{constant_vf({0.3, -0.2})};
    std::vector<Vec> x0s{Vec{0.1, 0.1}};

    std::vector<double> dts, gaps;
    for (int level : {0, 2}) {
        BrownianPaths paths = generate_paths(1, 1.0, 32, level, 61, 8);
        FlowOptions h, it;
        h.with_jacobian = it.with_jacobian = false;
        it.scheme = SdeScheme::ItoEulerCorrected;
        FlowEnsemble eh = integrate_flow(b, xis, paths, x0s, h);
        FlowEnsemble ei = integrate_flow(b, xis, paths, x0s, it);
        double acc = 0.0;
        for (int p = 0; p < paths.n_paths; ++p)
            acc += norm2(eh.position(p, 0, eh.steps) - ei.position(p, 0, ei.steps));
        dts.push_back(paths.spec.dt());
        gaps.push_back(acc / paths.n_paths);
    }
    CHECK(fit_rate(dts, gaps) > 0.8);
}

TEST_CASE("ensemble snapshots are byte stable across runs and threads") {
    VectorField b(2);
    b.comp[0] = trig_fn({0.9, 0.2}, 0.5, 0.0);
    b.comp[1] = trig_fn({0.3, 1.0}, 0.4, 0.4);
    std::vector<VectorField> xis{constant_vf({0.2, 0.1})};
    BrownianPaths paths = generate_paths(1, 0.5, 32, 0, 17, 6);
    std::vector<Vec> x0s{Vec{0.0, 0.0}, Vec{0.25, -0.5}};

    FlowOptions one, four;
    one.threads = 1;
    four.threads = 4;
    FlowEnsemble e1 = integrate_flow(b, xis, paths, x0s, one);
    FlowEnsemble e4 = integrate_flow(b, xis, paths, x0s, four);

    write_ensemble_csv(e1, "flow_snap_a.csv");
    write_ensemble_csv(e1, "flow_snap_b.csv");
    write_ensemble_csv(e4, "flow_snap_c.csv");

    std::string a = slurp("flow_snap_a.csv");
    CHECK(a == slurp("flow_snap_b.csv"));
    CHECK(a == slurp("flow_snap_c.csv"));
    CHECK(!a.empty());
}
