#include "doctest.h"
#include "klab/quadrature.hpp"

#include <cmath>

using namespace klab;

TEST_CASE("gauss-legendre nodes integrate polynomials exactly") {
    std::vector<double> x, w;

    // m points are exact through degree 2m-1 on [-1,1].
    for (int m : {2, 4, 6}) {
        gauss_legendre(m, x, w);
        REQUIRE(static_cast<int>(x.size()) == m);

        double mass = 0.0, quad = 0.0, high = 0.0;
        for (int i = 0; i < m; ++i) {
            mass += w[i];
            quad += w[i] * x[i] * x[i];
            high += w[i] * std::pow(x[i], 2 * m - 2);
        }
        CHECK(mass == doctest::Approx(2.0).epsilon(1e-13));
        CHECK(quad == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
        // integral of t^(2m-2) = 2/(2m-1)
        CHECK(high == doctest::Approx(2.0 / (2 * m - 1)).epsilon(1e-12));
    }
}

TEST_CASE("grid weights sum to the box volume") {
    QuadratureGrid g({-1.0, 0.0}, {2.0, 0.5}, 5);
    CHECK(g.volume() == doctest::Approx(1.5));
    double mass = 0.0;
    for (const auto& node : g.nodes()) mass += node.w;
    CHECK(mass == doctest::Approx(1.5).epsilon(1e-13));

    QuadratureGrid m({0.0}, {2.0}, 7, QuadRule::Midpoint);
    double mm = 0.0;
    for (const auto& node : m.nodes()) mm += node.w;
    CHECK(mm == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("tensor grids integrate separable polynomials exactly") {
    // integral over [-1,1]^2 of x^2 y^4 = (2/3)*(2/5) = 4/15.
    QuadratureGrid g = centered_box(2, 1.0, 4);
    double acc = 0.0;
    for (const auto& node : g.nodes())
        acc += node.w * node.x[0] * node.x[0] * std::pow(node.x[1], 4);
    CHECK(acc == doctest::Approx(4.0 / 15.0).epsilon(1e-13));
}

TEST_CASE("integrate_with_estimate tracks the truth for smooth integrands") {
    QuadratureGrid g = centered_box(1, 1.0, 12);
    QuadValue v = integrate_with_estimate(
        g, [](const Vec& p) { return std::exp(p[0]); });
    double truth = std::exp(1.0) - std::exp(-1.0);
    CHECK(std::abs(v.value - truth) < 1e-12);
    CHECK(v.error_estimate < 1e-10);

    // A rougher integrand should show a visibly larger estimate.
    QuadratureGrid c = centered_box(1, 1.0, 6);
    QuadValue rough = integrate_with_estimate(
        c, [](const Vec& p) { return std::abs(p[0]); });
    CHECK(rough.error_estimate > 1e-8);
    CHECK(std::abs(rough.value - 1.0) < 1e-2);
}

TEST_CASE("refined grid keeps the box") {
    QuadratureGrid g({-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}, 3);
    QuadratureGrid f = g.refined();
    CHECK(f.points_per_axis == 6);
    CHECK(f.volume() == doctest::Approx(g.volume()));
    double mass = 0.0;
    for (const auto& node : f.nodes()) mass += node.w;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("midpoint rule is first order but consistent") {
    // midpoint on [0,2] with many points: integral of x^3 = 4.
    QuadratureGrid m({0.0}, {2.0}, 200, QuadRule::Midpoint);
    double acc = 0.0;
    for (const auto& node : m.nodes()) acc += node.w * std::pow(node.x[0], 3);
    CHECK(acc == doctest::Approx(4.0).epsilon(1e-4));
}
