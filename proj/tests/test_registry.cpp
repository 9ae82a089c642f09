#include "doctest.h"
#include "klab/registry.hpp"
#include "klab/calculus.hpp"

#include <cmath>

using namespace klab;

TEST_CASE("constant and linear vector fields from json") {
    Json c = Json::parse(R"({"type":"constant","components":[0.5,-1.5]})");
    VectorField v = make_vector_field(c, 2);
    Vec val = v.eval(0.0, {3.0, 4.0});
    CHECK(val[0] == 0.5);
    CHECK(val[1] == -1.5);

    Json l = Json::parse(
        R"({"type":"linear","matrix":[[1.0,2.0],[0.0,-1.0]],"offset":[0.1,0.2]})");
    VectorField lin = make_vector_field(l, 2);
    Vec lv = lin.eval(0.0, {1.0, 1.0});
    CHECK(lv[0] == doctest::Approx(3.1));
    CHECK(lv[1] == doctest::Approx(-0.8));
    Mat J = lin.jacobian(0.0, {0.3, 0.7});
    CHECK(J(0, 1) == doctest::Approx(2.0));
    CHECK(J(1, 1) == doctest::Approx(-1.0));
}

TEST_CASE("rotation field spins the chosen plane") {
    Json r = Json::parse(R"({"type":"rotation","plane":[1,2],"omega":2.0})");
    VectorField v = make_vector_field(r, 3);
    Vec val = v.eval(0.0, {1.0, 0.0, 5.0});
    CHECK(val[0] == doctest::Approx(0.0));
    CHECK(val[1] == doctest::Approx(2.0));
    CHECK(val[2] == doctest::Approx(0.0));
    CHECK(v.divergence(0.0, {0.2, 0.3, 0.4}) == doctest::Approx(0.0));

    Json bad = Json::parse(R"({"type":"rotation","plane":[1,1],"omega":1.0})");
    CHECK_THROWS_AS(make_vector_field(bad, 3), std::invalid_argument);
    Json oob = Json::parse(R"({"type":"rotation","plane":[1,4],"omega":1.0})");
    CHECK_THROWS_AS(make_vector_field(oob, 3), std::invalid_argument);
}

TEST_CASE("radial holder field matches the closed form") {
    Json h = Json::parse(R"({"type":"radial-holder","alpha":0.5,"cutoff":2.0})");
    VectorField v = make_vector_field(h, 2);
    // |b| = |x|^alpha / (1-alpha) below the cutoff = 2 sqrt(|x|).
    Vec val = v.eval(0.0, {0.25, 0.0});
    CHECK(val[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(val[1] == doctest::Approx(0.0));
    // Capped above the cutoff.
    Vec far = v.eval(0.0, {9.0, 0.0});
    CHECK(far[0] == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("gaussian bump field and its jacobian") {
    Json g = Json::parse(
        R"({"type":"gaussian-bump","direction":[1.0,2.0],"center":[0.5,0.0],"width":0.8})");
    VectorField v = make_vector_field(g, 2);
    Vec at_center = v.eval(0.0, {0.5, 0.0});
    CHECK(at_center[0] == doctest::Approx(1.0));
    CHECK(at_center[1] == doctest::Approx(2.0));

    REQUIRE(v.has_jacobian());
    std::vector<Vec> probes{{0.2, 0.1}, {0.8, -0.3}};
    CHECK(jacobian_mismatch(v, 0.0, probes) < 1e-6);
}

TEST_CASE("trigonometric field and composition by sum and scale") {
    Json t = Json::parse(R"({
        "type": "trigonometric",
        "amplitudes": [0.5, 0.25],
        "wavevectors": [[1.0, 0.0], [0.0, 2.0]],
        "phases": [0.0, 0.5]
    })");
    VectorField v = make_vector_field(t, 2);
    Vec val = v.eval(0.0, {0.3, 0.4});
    CHECK(val[0] == doctest::Approx(0.5 * std::sin(0.3)).epsilon(1e-12));
    CHECK(val[1] == doctest::Approx(0.25 * std::sin(0.8 + 0.5)).epsilon(1e-12));

    Json comp = Json::parse(R"({
        "type": "sum",
        "terms": [
            {"type": "constant", "components": [1.0, 0.0]},
            {"type": "scale", "factor": -2.0,
             "term": {"type": "constant", "components": [0.25, 0.5]}}
        ]
    })");
    VectorField s = make_vector_field(comp, 2);
    Vec sv = s.eval(0.0, {0.0, 0.0});
    CHECK(sv[0] == doctest::Approx(0.5));
    CHECK(sv[1] == doctest::Approx(-1.0));
}

TEST_CASE("scalar registry covers the same primitives") {
    Json c = Json::parse(R"({"type":"constant","value":2.5})");
    CHECK(make_scalar(c, 2).value(0.0, {1.0, 1.0}) == 2.5);

    Json t = Json::parse(
        R"({"type":"trigonometric","amplitude":2.0,"wavevector":[1.0,1.0],"phase":0.1})");
    ScalarFn f = make_scalar(t, 2);
    CHECK(f.value(0.0, {0.2, 0.3}) == doctest::Approx(2.0 * std::sin(0.6)).epsilon(1e-12));
    REQUIRE(f.has_grad());

    Json b = Json::parse(R"({"type":"bump","radius":1.0,"amplitude":3.0})");
    ScalarFn bump = make_scalar(b, 2);
    CHECK(bump.value(0.0, {0.0, 0.0}) == doctest::Approx(3.0 * std::exp(-1.0)).epsilon(1e-12));
    CHECK(bump.value(0.0, {1.5, 0.0}) == 0.0);

    Json g = Json::parse(R"({"type":"gaussian-bump","width":0.5,"center":[0.1,0.1]})");
    ScalarFn gb = make_scalar(g, 2);
    CHECK(gb.value(0.0, {0.1, 0.1}) == doctest::Approx(1.0));

    Json sum = Json::parse(R"({
        "type": "sum",
        "terms": [{"type":"constant","value":1.0},
                  {"type":"scale","factor":3.0,"term":{"type":"constant","value":2.0}}]
    })");
    CHECK(make_scalar(sum, 2).value(0.0, {0.0, 0.0}) == doctest::Approx(7.0));
}

TEST_CASE("form registry builds channelwise and as bump forms") {
    Json f = Json::parse(R"({
        "degree": 1,
        "channels": [{"type":"constant","value":0.5},
                     {"type":"trigonometric","amplitude":1.0,"wavevector":[1.0,0.0]}]
    })");
    KFormField K = make_form(f, 2);
    CHECK(K.k == 1);
    Vec v = K.eval(0.0, {0.4, 0.0});
    CHECK(v[0] == 0.5);
    CHECK(v[1] == doctest::Approx(std::sin(0.4)).epsilon(1e-12));

    Json bf = Json::parse(R"({"type":"bump-form","degree":1,"radius":0.8,"values":[1.0,-2.0]})");
    KFormField B = make_form(bf, 2);
    Vec inside = B.eval(0.0, {0.0, 0.0});
    CHECK(inside[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(inside[1] == doctest::Approx(-2.0 * std::exp(-1.0)).epsilon(1e-12));
    Vec outside = B.eval(0.0, {1.0, 0.0});
    CHECK(outside[0] == 0.0);
}

TEST_CASE("registry errors identify the problem") {
    Json unknown = Json::parse(R"({"type":"vortex"})");
    CHECK_THROWS_WITH_AS(make_vector_field(unknown, 2),
                         doctest::Contains("vortex"), std::invalid_argument);

    Json short_components = Json::parse(R"({"type":"constant","components":[1.0]})");
    CHECK_THROWS_AS(make_vector_field(short_components, 2), std::invalid_argument);

    Json no_type = Json::parse(R"({"components":[1.0,2.0]})");
    CHECK_THROWS_AS(make_vector_field(no_type, 2), std::invalid_argument);

    Json wrong_channels = Json::parse(
        R"({"degree":1,"channels":[{"type":"constant","value":1.0}]})");
    CHECK_THROWS_AS(make_form(wrong_channels, 2), std::invalid_argument);

    Json bad_degree = Json::parse(R"({"degree":5,"channels":[]})");
    CHECK_THROWS_AS(make_form(bad_degree, 2), std::invalid_argument);
}

TEST_CASE("type listings are non-empty and contain the primitives") {
    auto vt = vector_field_types();
    auto st = scalar_types();
    CHECK(!vt.empty());
    CHECK(!st.empty());
    bool has_rot = false;
    for (const auto& s : vt) has_rot = has_rot || s == "rotation";
    CHECK(has_rot);
}
