#include "doctest.h"
#include "klab/calculus.hpp"

#include <cmath>
#include <stdexcept>

using namespace klab;

namespace {

// Smooth trigonometric k-form with analytic derivatives on every channel.
KFormField trig_form(int n, int k, unsigned tag) {
    KFormField F(n, k);
    for (int r = 0; r < F.channels(); ++r) {
        Vec w(n, 0.0);
        for (int i = 0; i < n; ++i) w[i] = 0.3 + 0.17 * static_cast<double>((tag + 3u * r + i) % 5u);
        double amp = 0.5 + 0.1 * static_cast<double>((tag + r) % 4u);
        double ph = 0.25 * static_cast<double>(tag % 7u) + 0.4 * r;
        F.coeff[r] = trig_fn(w, amp, ph);
    }
    return F;
}

VectorField trig_vf(int n, unsigned tag) {
    VectorField v(n);
    for (int i = 0; i < n; ++i) {
        Vec w(n, 0.0);
        for (int j = 0; j < n; ++j) w[j] = 0.2 + 0.13 * static_cast<double>((tag + 2u * i + j) % 6u);
        v.comp[i] = trig_fn(w, 0.4 + 0.07 * i, 0.3 * static_cast<double>(tag % 5u) + 0.5 * i);
    }
    return v;
}

Vec probe(int n, unsigned tag) {
    Vec x(n, 0.0);
    for (int i = 0; i < n; ++i) x[i] = -0.4 + 0.23 * static_cast<double>((tag + i) % 7u);
    return x;
}

double max_channel_gap(const KFormField& a, const KFormField& b, double t, const Vec& x) {
    Vec va = a.eval(t, x), vb = b.eval(t, x);
    double m = 0.0;
    for (size_t i = 0; i < va.size(); ++i) m = std::max(m, std::abs(va[i] - vb[i]));
    return m;
}

} // namespace

TEST_CASE("wedge of plane 1-forms") {
    // (2 dx1 + 3 dx2) ^ (-1 dx1 + 4 dx2) = (2*4 - 3*(-1)) dx12 = 11 dx12.
    KFormField a = constant_form(2, 1, {2.0, 3.0});
    KFormField b = constant_form(2, 1, {-1.0, 4.0});
    KFormField w = wedge(a, b);
    REQUIRE(w.k == 2);
    CHECK(w.eval(0.0, {0.1, 0.2})[0] == doctest::Approx(11.0));
}

TEST_CASE("wedge graded antisymmetry") {
    Vec x = probe(3, 4);
    for (int k = 0; k <= 2; ++k) {
        for (int l = 0; l + k <= 3; ++l) {
            KFormField a = trig_form(3, k, 11 + k);
            KFormField b = trig_form(3, l, 23 + l);
            KFormField ab = wedge(a, b);
            KFormField ba = scale((k * l) % 2 == 0 ? 1.0 : -1.0, wedge(b, a));
            CHECK(max_channel_gap(ab, ba, 0.0, x) < 1e-12);
        }
    }
}

TEST_CASE("wedge with basis forms reproduces shuffle signs") {
    // dx13 ^ dx2 = -dx123 (move 2 past 3: one transposition).
    KFormField a = basis_form(3, {1, 3});
    KFormField b = basis_form(3, {2});
    KFormField w = wedge(a, b);
    CHECK(w.eval(0.0, {0.0, 0.0, 0.0})[0] == doctest::Approx(-1.0));
}

TEST_CASE("exterior derivative of a scalar is its gradient") {
    // f = sin(x1 + 2 x2): df = cos(x1 + 2 x2) (dx1 + 2 dx2).
    KFormField f(2, 0);
    f.coeff[0] = trig_fn({1.0, 2.0}, 1.0, 0.0);
    KFormField df = exterior_derivative(f);
    Vec x{0.3, 0.4};
    double c = std::cos(1.1);
    Vec v = df.eval(0.0, x);
    CHECK(v[0] == doctest::Approx(c).epsilon(1e-10));
    CHECK(v[1] == doctest::Approx(2.0 * c).epsilon(1e-10));
}

TEST_CASE("d squared vanishes") {
    for (int k = 0; k <= 1; ++k) {
        KFormField a = trig_form(3, k, 7 + k);
        KFormField dda = exterior_derivative(exterior_derivative(a));
        Vec x = probe(3, 2 + k);
        for (double c : dda.eval(0.0, x)) CHECK(std::abs(c) < 1e-7);
    }
    // With analytic Hessians the cancellation is exact to rounding.
    KFormField f(2, 0);
    f.coeff[0] = trig_fn({0.9, -1.3}, 0.8, 0.2);
    KFormField ddf = exterior_derivative(exterior_derivative(f));
    CHECK(std::abs(ddf.eval(0.0, {0.4, -0.2})[0]) < 1e-12);
}

TEST_CASE("exterior derivative of a top form vanishes") {
    KFormField top(2, 2);
    top.coeff[0] = trig_fn({0.8, 1.4}, 0.7, 0.1);
    KFormField d = exterior_derivative(top);
    for (double c : d.eval(0.0, {0.3, -0.2})) CHECK(c == 0.0);
}

TEST_CASE("hodge star on the plane") {
    Vec x{0.2, -0.1};
    // star dx1 = dx2, star dx2 = -dx1, star 1 = dx12, star dx12 = 1.
    CHECK(hodge_star(basis_form(2, {1})).eval(0.0, x)[1] == doctest::Approx(1.0));
    CHECK(hodge_star(basis_form(2, {1})).eval(0.0, x)[0] == doctest::Approx(0.0));
    CHECK(hodge_star(basis_form(2, {2})).eval(0.0, x)[0] == doctest::Approx(-1.0));
    CHECK(hodge_star(constant_form(2, 0, {1.0})).eval(0.0, x)[0] == doctest::Approx(1.0));
    CHECK(hodge_star(basis_form(2, {1, 2})).eval(0.0, x)[0] == doctest::Approx(1.0));
}

TEST_CASE("hodge star in three dimensions") {
    Vec x{0.0, 0.0, 0.0};
    // star dx1 = dx23, star dx2 = -dx13, star dx3 = dx12.
    {
        Vec v = hodge_star(basis_form(3, {1})).eval(0.0, x);
        CHECK(v[0] == doctest::Approx(0.0));
        CHECK(v[1] == doctest::Approx(0.0));
        CHECK(v[2] == doctest::Approx(1.0));
    }
    {
        Vec v = hodge_star(basis_form(3, {2})).eval(0.0, x);
        CHECK(v[1] == doctest::Approx(-1.0));
    }
    {
        Vec v = hodge_star(basis_form(3, {3})).eval(0.0, x);
        CHECK(v[0] == doctest::Approx(1.0));
    }
    // And back down: star dx23 = dx1, star dx13 = -dx2, star dx12 = dx3.
    CHECK(hodge_star(basis_form(3, {2, 3})).eval(0.0, x)[0] == doctest::Approx(1.0));
    CHECK(hodge_star(basis_form(3, {1, 3})).eval(0.0, x)[1] == doctest::Approx(-1.0));
    CHECK(hodge_star(basis_form(3, {1, 2})).eval(0.0, x)[2] == doctest::Approx(1.0));
}

TEST_CASE("double star sign and inverse") {
    for (int n = 2; n <= 4; ++n) {
        for (int k = 0; k <= n; ++k) {
            KFormField a = trig_form(n, k, 31 + 5u * n + k);
            double sgn = ((k * (n - k)) % 2 == 0) ? 1.0 : -1.0;
            KFormField ss = hodge_star(hodge_star(a));
            KFormField expect = scale(sgn, a);
            Vec x = probe(n, 9 + k);
            CHECK(max_channel_gap(ss, expect, 0.0, x) < 1e-12);

            KFormField round = hodge_star_inverse(hodge_star(a));
            CHECK(max_channel_gap(round, a, 0.0, x) < 1e-12);
        }
    }
}

TEST_CASE("pointwise pairing identity beta ^ star(alpha) = <beta, alpha> vol") {
    for (int k = 0; k <= 3; ++k) {
        KFormField alpha = trig_form(3, k, 41 + k);
        KFormField beta = trig_form(3, k, 57 + k);
        KFormField top = wedge(beta, hodge_star(alpha));
        Vec x = probe(3, 13 + k);
        double lhs = top.eval(0.0, x)[0];
        double rhs = inner_product_pointwise(beta, alpha, 0.0, x);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
    }
}

TEST_CASE("contraction with a constant field") {
    // i_X dx12 with X = (5,7): X^1 dx2 - X^2 dx1 = -7 dx1 + 5 dx2.
    VectorField X = constant_vf({5.0, 7.0});
    KFormField c = contract(X, basis_form(2, {1, 2}));
    Vec v = c.eval(0.0, {0.3, 0.3});
    CHECK(v[0] == doctest::Approx(-7.0));
    CHECK(v[1] == doctest::Approx(5.0));

    // Contracting a 0-form is meaningless and should throw.
    CHECK_THROWS_AS(contract(X, constant_form(2, 0, {1.0})), std::invalid_argument);
}

TEST_CASE("cartan formula") {
    // L_b = d i_b + i_b d on middle degrees, checked with analytic fields.
    VectorField b = trig_vf(3, 3);
    for (int k = 1; k <= 2; ++k) {
        KFormField K = trig_form(3, k, 61 + k);
        KFormField lie = lie_derivative(b, K);
        KFormField via_cartan = add(exterior_derivative(contract(b, K)),
                                    contract(b, exterior_derivative(K)));
        Vec x = probe(3, 17 + k);
        CHECK(max_channel_gap(lie, via_cartan, 0.0, x) < 1e-8);
    }
}

TEST_CASE("lie derivative hand value on the plane") {
    // b = (x2, -x1), K = x1 dx2. Components:
    //   (L_b K)_1 = K_2 d1 b^2 = x1 * (-1)
    //   (L_b K)_2 = b . grad(x1) = x2
    // at (0.3, 0.7): (-0.3, 0.7).
    Mat A(2);
    A(0, 1) = 1.0;
    A(1, 0) = -1.0;
    VectorField b = linear_vf(A, Vec(2, 0.0));
    KFormField K(2, 1);
    K.coeff[0] = zero_fn();
    K.coeff[1] = affine_fn(0.0, {1.0, 0.0});

    Vec v = lie_derivative(b, K).eval(0.0, {0.3, 0.7});
    CHECK(v[0] == doctest::Approx(-0.3).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("adjoint on scalars is minus the divergence of b theta") {
    VectorField b = trig_vf(2, 9);
    KFormField theta(2, 0);
    theta.coeff[0] = trig_fn({0.7, -0.5}, 0.9, 0.1);
    KFormField adj = lie_derivative_adjoint(b, theta);

    Vec x{0.25, -0.35};
    Vec bv = b.eval(0.0, x);
    Vec gt = theta.coeff[0].gradient(0.0, x);
    double expect = -b.divergence(0.0, x) * theta.coeff[0].value(0.0, x) - dot(bv, gt);
    CHECK(adj.eval(0.0, x)[0] == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("adjoint pairing identity under quadrature") {
    QuadratureGrid grid = centered_box(2, 1.6, 24);
    for (int k = 0; k <= 2; ++k) {
        VectorField b = trig_vf(2, 21 + k);
        KFormField K = trig_form(2, k, 71 + k);
        TestForm theta = make_test_form(2, k, 1.3, Vec(binomial(2, k), 0.8));

        QuadValue r1 = l2_pairing_with_estimate(lie_derivative(b, K), theta.form, grid);
        QuadValue r2 = l2_pairing_with_estimate(K, lie_derivative_adjoint(b, theta.form), grid);
        double tol = std::max(1e-8, 3.0 * (r1.error_estimate + r2.error_estimate));
        CHECK(std::abs(r1.value - r2.value) < tol);
    }
}

TEST_CASE("integral pairing agrees with the wedge route") {
    QuadratureGrid grid = centered_box(3, 1.2, 10);
    KFormField alpha = trig_form(3, 2, 83);
    KFormField beta = trig_form(3, 2, 97);
    double direct = l2_pairing(beta, alpha, grid);
    double via_wedge = integrate_top_form(wedge(beta, hodge_star(alpha)), grid);
    CHECK(direct == doctest::Approx(via_wedge).epsilon(1e-11));
}

TEST_CASE("pushforward along an affine map") {
    Mat A(2);
    A(0, 0) = 2.0; A(0, 1) = 1.0;
    A(1, 0) = 0.0; A(1, 1) = 1.0;
    SampledDiffeo phi = affine_diffeo(A, {0.5, -1.0});

    // For K = dx1 the channels of phi_* K are the first row of A^{-1}:
    // A^{-1} = [[0.5, -0.5], [0, 1]].
    KFormField K = basis_form(2, {1});
    Vec v = pushforward(phi, K).eval(0.0, {0.7, 0.9});
    CHECK(v[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(-0.5).epsilon(1e-12));

    // Top degree picks up det(A^{-1}) = 1/2.
    KFormField top = basis_form(2, {1, 2});
    CHECK(pushforward(phi, top).eval(0.0, {0.1, 0.1})[0] == doctest::Approx(0.5).epsilon(1e-12));

    // Degree zero composes with the inverse map: (phi_* f)(phi(y)) = f(y).
    KFormField f(2, 0);
    f.coeff[0] = trig_fn({1.1, 0.6}, 1.0, 0.3);
    Vec y{0.2, -0.4};
    Vec im = phi.fwd(y);
    CHECK(pushforward(phi, f).eval(0.0, im)[0] ==
          doctest::Approx(f.eval(0.0, y)[0]).epsilon(1e-11));
}

TEST_CASE("pullback undoes pushforward") {
    Mat A(3);
    A(0, 0) = 1.2; A(0, 1) = 0.3; A(0, 2) = -0.1;
    A(1, 0) = 0.0; A(1, 1) = 0.9; A(1, 2) = 0.4;
    A(2, 0) = 0.2; A(2, 1) = -0.3; A(2, 2) = 1.1;
    SampledDiffeo phi = affine_diffeo(A, {0.1, 0.0, -0.2});

    for (int k = 1; k <= 2; ++k) {
        KFormField K = trig_form(3, k, 15 + k);
        KFormField round = pullback(phi, pushforward(phi, K));
        Vec x = probe(3, 29 + k);
        CHECK(max_channel_gap(round, K, 0.0, x) < 1e-10);
    }
}

TEST_CASE("musical isomorphisms are channel identities") {
    KFormField K = trig_form(3, 1, 19);
    Vec x = probe(3, 5);
    CHECK(max_channel_gap(sharp(K), K, 0.0, x) == 0.0);
    CHECK(max_channel_gap(flat(sharp(K)), K, 0.0, x) == 0.0);
}

TEST_CASE("weak derivative check accepts channel partials and rejects tampering") {
    QuadratureGrid grid = centered_box(2, 1.6, 24);
    KFormField K = trig_form(2, 1, 33);
    std::vector<KFormField> S;
    for (int i = 0; i < 2; ++i) S.push_back(channel_partial(K, i));

    std::vector<TestForm> thetas;
    thetas.push_back(make_test_form(2, 1, 1.3, Vec{0.9, -0.6}));
    thetas.push_back(make_test_form(2, 1, 1.1, Vec{0.4, 0.7}));

    double ok = weak_derivative_check(K, S, grid, thetas);
    CHECK(ok < 1e-7);

    std::vector<KFormField> bad = S;
    bad[0] = add(bad[0], constant_form(2, 1, {0.2, 0.0}));
    double broken = weak_derivative_check(K, bad, grid, thetas);
    CHECK(broken > 1e-3);
}
