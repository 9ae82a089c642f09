#include "doctest.h"
#include "klab/mollifier.hpp"
#include "klab/calculus.hpp"

#include <cmath>

using namespace klab;

TEST_CASE("kernel mass is one in every dimension used") {
    for (int n = 1; n <= 3; ++n) {
        Mollifier m = make_mollifier(n, 0.3, 16);
        CHECK(mollifier_mass(m) == doctest::Approx(1.0).epsilon(5e-7));
    }
}

TEST_CASE("kernel is symmetric and scales with epsilon") {
    Mollifier m = make_mollifier(2, 0.25, 12);
    Vec z{0.1, -0.05};
    Vec zm{-0.1, 0.05};
    CHECK(m.value(z) == doctest::Approx(m.value(zm)).epsilon(1e-13));

    // rho_eps(0) = eps^-n rho(0): halving eps quadruples the peak in 2D.
    Mollifier half = make_mollifier(2, 0.125, 12);
    CHECK(half.value(Vec(2, 0.0)) ==
          doctest::Approx(4.0 * m.value(Vec(2, 0.0))).epsilon(1e-12));

    // Supported strictly inside |z| < eps.
    CHECK(m.value(Vec{0.3, 0.0}) == 0.0);
    CHECK(m.grad(Vec{0.3, 0.0})[0] == 0.0);
}

TEST_CASE("mollifying a constant is exact") {
    KFormField K = constant_form(2, 1, {0.8, -0.3});
    Mollifier m = make_mollifier(2, 0.2, 14);
    KFormField s = mollify(K, m);
    Vec v = s.eval(0.0, {0.4, 0.1});
    CHECK(v[0] == doctest::Approx(0.8).epsilon(1e-9));
    CHECK(v[1] == doctest::Approx(-0.3).epsilon(1e-9));

    // Shifting the kernel center cannot change a constant either.
    Mollifier ms = make_mollifier(2, 0.2, 14, Vec{0.4, 0.0});
    Vec vs = mollify(K, ms).eval(0.0, {0.4, 0.1});
    CHECK(vs[0] == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("symmetric kernel reproduces affine fields exactly") {
    // Odd moments vanish, so rho_eps * (a.x + c) = a.x + c.
    KFormField K(2, 0);
    K.coeff[0] = affine_fn(0.7, {1.5, -2.0});
    Mollifier m = make_mollifier(2, 0.3, 16);
    KFormField s = mollify(K, m);
    Vec x{0.2, -0.6};
    CHECK(s.eval(0.0, x)[0] == doctest::Approx(K.eval(0.0, x)[0]).epsilon(1e-8));

    // A shifted kernel sees the slope: the value moves by about |a| eps |c|.
    Mollifier ms = make_mollifier(2, 0.3, 16, Vec{0.5, 0.0});
    double moved = mollify(K, ms).eval(0.0, x)[0];
    CHECK(std::abs(moved - K.eval(0.0, x)[0]) > 0.05);
}

TEST_CASE("mollified field converges as epsilon shrinks") {
    KFormField K(2, 1);
    K.coeff[0] = trig_fn({1.2, 0.7}, 0.9, 0.3);
    K.coeff[1] = trig_fn({-0.5, 1.1}, 0.6, 0.8);
    Vec x{0.3, -0.2};
    Vec truth = K.eval(0.0, x);

    double prev = -1.0;
    for (double eps : {0.4, 0.2, 0.1}) {
        Mollifier m = make_mollifier(2, eps, 14);
        Vec v = mollify(K, m).eval(0.0, x);
        double err = std::max(std::abs(v[0] - truth[0]), std::abs(v[1] - truth[1]));
        if (prev >= 0.0) CHECK(err < prev);
        prev = err;
    }
    CHECK(prev < 5e-3);
}

TEST_CASE("mollified gradient matches the derivative of the mollification") {
    // For smooth f the kernel-derivative route must agree with the analytic
    // derivative of f mollified, i.e. with rho * f'.
    KFormField K(2, 0);
    K.coeff[0] = trig_fn({1.0, -0.6}, 1.1, 0.2);
    Mollifier m = make_mollifier(2, 0.25, 16);
    KFormField s = mollify(K, m);

    Vec x{0.15, 0.45};
    REQUIRE(s.coeff[0].has_grad());
    Vec g = s.coeff[0].gradient(0.0, x);

    // rho * (df/dx_i), computed by mollifying the partials directly.
    for (int i = 0; i < 2; ++i) {
        KFormField dK = channel_partial(K, i);
        double expect = mollify(dK, m).eval(0.0, x)[0];
        CHECK(g[i] == doctest::Approx(expect).epsilon(1e-7));
    }

    REQUIRE(s.coeff[0].has_hess());
    Mat H = s.coeff[0].hessian(0.0, x);
    CHECK(H(0, 1) == doctest::Approx(H(1, 0)).epsilon(1e-7));
}

TEST_CASE("vector fields mollify componentwise with a usable jacobian") {
    VectorField v(2);
    v.comp[0] = trig_fn({0.9, 0.4}, 0.8, 0.0);
    v.comp[1] = trig_fn({-0.3, 1.2}, 0.5, 0.6);
    Mollifier m = make_mollifier(2, 0.2, 14);
    VectorField s = mollify_vf(v, m);

    REQUIRE(s.has_jacobian());
    std::vector<Vec> probes{{0.1, 0.2}, {-0.3, 0.4}};
    CHECK(jacobian_mismatch(s, 0.0, probes) < 1e-6);
}

TEST_CASE("distributional route matches the function route") {
    KFormField K(2, 1);
    K.coeff[0] = trig_fn({0.8, -0.5}, 0.7, 0.1);
    K.coeff[1] = trig_fn({0.4, 1.0}, 0.9, 0.5);
    TestForm theta = make_test_form(2, 1, 1.2, Vec{0.6, -0.8});
    QuadratureGrid grid = centered_box(2, 1.5, 20);
    Mollifier m = make_mollifier(2, 0.25, 12);

    PairingFunctional Kdist = [&](const KFormField& test) {
        return l2_pairing(K, test, grid);
    };
    double via_dist = mollify_distributional(Kdist, m, theta.form);
    double via_fn = l2_pairing(mollify(K, m), theta.form, grid);
    CHECK(via_dist == doctest::Approx(via_fn).epsilon(1e-6));
}
