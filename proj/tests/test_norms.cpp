#include "doctest.h"
#include "klab/norms.hpp"

#include <cmath>

using namespace klab;

namespace {
const double kPi = 3.14159265358979323846;
}

TEST_CASE("lp norms of constant forms over a box") {
    // Fiber norm of (3,4) is 5 everywhere; box [-1,1]^2 has volume 4.
    KFormField K = constant_form(2, 1, {3.0, 4.0});
    QuadratureGrid g = centered_box(2, 1.0, 12);

    CHECK(lp_norm(K, 2.0, g) == doctest::Approx(10.0).epsilon(1e-10));
    CHECK(lp_norm(K, 1.0, g) == doctest::Approx(20.0).epsilon(1e-10));
    CHECK(lp_norm(K, std::numeric_limits<double>::infinity(), g) ==
          doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("ball-restricted norms approximate ball integrals") {
    KFormField K = constant_form(2, 0, {2.0});
    QuadratureGrid g = centered_box(2, 1.1, 48);
    Vec c(2, 0.0);

    // L2 over the unit disk: 2 * sqrt(pi).
    double l2 = lp_norm_ball(K, 2.0, c, 1.0, g);
    CHECK(l2 == doctest::Approx(2.0 * std::sqrt(kPi)).epsilon(0.02));

    CHECK(sup_norm_ball(K, c, 1.0, g) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("vector field norms") {
    VectorField v = constant_vf({3.0, 4.0});
    QuadratureGrid g = centered_box(2, 1.1, 40);
    Vec c(2, 0.0);

    CHECK(vf_sup_norm_ball(v, c, 1.0, g) == doctest::Approx(5.0).epsilon(1e-12));

    Mat A(2);
    A(0, 0) = 2.0; A(1, 1) = 0.5;
    VectorField lin = linear_vf(A, Vec(2, 0.0));
    double fro = std::sqrt(4.0 + 0.25);
    CHECK(vf_jacobian_sup_ball(lin, c, 1.0, g) == doctest::Approx(fro).epsilon(1e-12));
    // |Dv|_F constant: its ball integral is fro * pi R^2.
    CHECK(vf_jacobian_l1_ball(lin, c, 1.0, g) == doctest::Approx(fro * kPi).epsilon(0.02));
    // Affine fields have no curvature.
    CHECK(vf_hessian_l1_ball(lin, c, 1.0, g) < 1e-6);

    // W^{1,1} of a constant is |v| * area.
    CHECK(vf_w11_ball(v, c, 1.0, g) == doctest::Approx(5.0 * kPi).epsilon(0.02));
}

TEST_CASE("probe pairs are deterministic and live in the ball") {
    Vec c{0.5, -0.25};
    auto pairs = random_probe_pairs(2, c, 0.75, 200, 99);
    auto again = random_probe_pairs(2, c, 0.75, 200, 99);
    auto other = random_probe_pairs(2, c, 0.75, 200, 100);

    REQUIRE(pairs.size() == 200);
    bool same = true, differ = false;
    for (size_t i = 0; i < pairs.size(); ++i) {
        same = same && pairs[i].x == again[i].x && pairs[i].y == again[i].y;
        differ = differ || pairs[i].x != other[i].x;
        CHECK(norm2(pairs[i].x - c) <= 0.75 + 1e-12);
        CHECK(norm2(pairs[i].y - c) <= 0.75 + 1e-12);
    }
    CHECK(same);
    CHECK(differ);
}

TEST_CASE("holder estimate recovers a Lipschitz constant at alpha = 1") {
    Mat A(2);
    A(0, 0) = 2.0; A(1, 1) = 0.5;
    VectorField lin = linear_vf(A, Vec(2, 0.0));
    auto pairs = random_probe_pairs(2, Vec(2, 0.0), 1.0, 4000, 7);

    double est = holder_seminorm_estimate(lin, 1.0, pairs);
    // Largest singular value is 2; the estimate is a lower bound that random
    // directions should nearly attain.
    CHECK(est <= 2.0 + 1e-9);
    CHECK(est > 1.95);
}

TEST_CASE("holder estimate sees the cusp of a rough field") {
    // v = x / |x|^(1/2): along antipodal pairs the alpha = 1/2 ratio is
    // 2^(1/2) |x|^(1/4)... the estimate must stay finite, positive, and
    // larger than the smooth-field value at the same exponent.
    VectorField rough(2);
    for (int i = 0; i < 2; ++i) {
        rough.comp[i] = ScalarFn([i](double, const Vec& x) {
            double r = norm2(x);
            if (r < 1e-300) return 0.0;
            return x[i] * std::pow(r, -0.5);
        });
    }
    auto pairs = random_probe_pairs(2, Vec(2, 0.0), 1.0, 4000, 11);
    double est = holder_seminorm_estimate(rough, 0.5, pairs);
    CHECK(est > 1.0);
    CHECK(std::isfinite(est));

    // A constant form has no variation at all.
    KFormField K = constant_form(2, 1, {0.7, -0.3});
    CHECK(holder_seminorm_estimate(K, 0.5, pairs) == doctest::Approx(0.0));
}
