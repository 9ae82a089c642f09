#include "klab/registry.hpp"

#include "klab/counterexample.hpp"
#include "klab/multi_index.hpp"

#include <cmath>
#include <stdexcept>

namespace klab {

namespace {

[[noreturn]] void bad(const std::string& what) {
    throw std::invalid_argument("field spec: " + what);
}

std::string type_of(const Json& spec) {
    if (!spec.is_object()) bad("expected an object with a \"type\" key");
    if (!spec.contains("type") || !spec["type"].is_string()) bad("missing \"type\"");
    return spec["type"].get<std::string>();
}

Vec get_vec(const Json& j, const std::string& key, int expect = -1) {
    if (!j.contains(key) || !j[key].is_array()) bad("missing array \"" + key + "\"");
    Vec out;
    for (const auto& e : j[key]) {
        if (!e.is_number()) bad("\"" + key + "\" must hold numbers");
        out.push_back(e.get<double>());
    }
    if (expect >= 0 && static_cast<int>(out.size()) != expect)
        bad("\"" + key + "\" must have length " + std::to_string(expect));
    return out;
}

double get_num(const Json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_number()) bad("missing number \"" + key + "\"");
    return j[key].get<double>();
}

double get_num_or(const Json& j, const std::string& key, double dflt) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_number()) bad("\"" + key + "\" must be a number");
    return j[key].get<double>();
}

} // namespace

VectorField make_vector_field(const Json& spec, int n) {
    std::string type = type_of(spec);
    if (type == "constant") {
        return constant_vf(get_vec(spec, "components", n));
    }
    if (type == "linear") {
        if (!spec.contains("matrix") || !spec["matrix"].is_array()) bad("linear: missing \"matrix\"");
        const auto& rows = spec["matrix"];
        if (static_cast<int>(rows.size()) != n) bad("linear: matrix must have n rows");
        Mat A(n);
        for (int i = 0; i < n; ++i) {
            if (!rows[i].is_array() || static_cast<int>(rows[i].size()) != n)
                bad("linear: matrix rows must have n entries");
            for (int j = 0; j < n; ++j) A(i, j) = rows[i][j].get<double>();
        }
        Vec c(n, 0.0);
        if (spec.contains("offset")) c = get_vec(spec, "offset", n);
        return linear_vf(A, c);
    }
    if (type == "rotation") {
        Vec plane = get_vec(spec, "plane", 2);
        int i = static_cast<int>(plane[0]), j = static_cast<int>(plane[1]);
        if (i < 0 || j < 0 || i >= n || j >= n || i == j)
            bad("rotation: plane axes must be distinct and < n");
        double omega = get_num(spec, "omega");
        Mat A(n);
        A(i, j) = -omega;
        A(j, i) = omega;
        return linear_vf(A, Vec(n, 0.0));
    }
    if (type == "radial-holder") {
        double alpha = get_num(spec, "alpha");
        double R = get_num_or(spec, "cutoff", 1.0);
        return holder_drift(alpha, R, n);
    }
    if (type == "gaussian-bump") {
        Vec dir = get_vec(spec, "direction", n);
        Vec center = spec.contains("center") ? get_vec(spec, "center", n) : Vec(n, 0.0);
        double width = get_num(spec, "width");
        if (width <= 0.0) bad("gaussian-bump: width must be positive");
        VectorField v(n);
        v.label = "gaussian-bump";
        for (int i = 0; i < n; ++i) {
            auto val = [=](double, const Vec& x) {
                double q = 0.0;
                for (int l = 0; l < n; ++l) q += (x[l] - center[l]) * (x[l] - center[l]);
                return dir[i] * std::exp(-q / (2.0 * width * width));
            };
            auto grad = [=](double t, const Vec& x) {
                double g = val(t, x);
                Vec out(n);
                for (int j = 0; j < n; ++j) out[j] = -g * (x[j] - center[j]) / (width * width);
                return out;
            };
            v.comp[i] = ScalarFn(val, grad);
        }
        return v;
    }
    if (type == "trigonometric") {
        Vec amps = get_vec(spec, "amplitudes", n);
        Vec phases = spec.contains("phases") ? get_vec(spec, "phases", n) : Vec(n, 0.0);
        if (!spec.contains("wavevectors") || !spec["wavevectors"].is_array() ||
            static_cast<int>(spec["wavevectors"].size()) != n)
            bad("trigonometric: need one wavevector per component");
        VectorField v(n);
        v.label = "trigonometric";
        for (int i = 0; i < n; ++i) {
            Vec w;
            for (const auto& e : spec["wavevectors"][i]) w.push_back(e.get<double>());
            if (static_cast<int>(w.size()) != n) bad("trigonometric: wavevector length mismatch");
            v.comp[i] = trig_fn(w, amps[i], phases[i]);
        }
        return v;
    }
    if (type == "sum") {
        if (!spec.contains("terms") || !spec["terms"].is_array() || spec["terms"].empty())
            bad("sum: missing \"terms\"");
        VectorField acc = make_vector_field(spec["terms"][0], n);
        for (std::size_t i = 1; i < spec["terms"].size(); ++i)
            acc = add(acc, make_vector_field(spec["terms"][i], n));
        return acc;
    }
    if (type == "scale") {
        if (!spec.contains("term")) bad("scale: missing \"term\"");
        return scale(get_num(spec, "factor"), make_vector_field(spec["term"], n));
    }
    bad("unknown vector field type \"" + type + "\"");
}

ScalarFn make_scalar(const Json& spec, int n) {
    std::string type = type_of(spec);
    if (type == "constant") return constant_fn(get_num(spec, "value"));
    if (type == "trigonometric")
        return trig_fn(get_vec(spec, "wavevector", n), get_num(spec, "amplitude"),
                       get_num_or(spec, "phase", 0.0));
    if (type == "gaussian-bump") {
        Vec center = spec.contains("center") ? get_vec(spec, "center", n) : Vec(n, 0.0);
        double width = get_num(spec, "width");
        double amp = get_num_or(spec, "amplitude", 1.0);
        if (width <= 0.0) bad("gaussian-bump: width must be positive");
        auto val = [=](double, const Vec& x) {
            double q = 0.0;
            for (int i = 0; i < n; ++i) q += (x[i] - center[i]) * (x[i] - center[i]);
            return amp * std::exp(-q / (2.0 * width * width));
        };
        auto grad = [=](double t, const Vec& x) {
            double v = val(t, x);
            Vec g(n);
            for (int i = 0; i < n; ++i) g[i] = -v * (x[i] - center[i]) / (width * width);
            return g;
        };
        return ScalarFn(val, grad);
    }
    if (type == "bump") {
        double R = get_num(spec, "radius");
        double amp = get_num_or(spec, "amplitude", 1.0);
        if (R <= 0.0) bad("bump: radius must be positive");
        return scale(amp, bump_fn(R));
    }
    if (type == "sum") {
        if (!spec.contains("terms") || !spec["terms"].is_array() || spec["terms"].empty())
            bad("sum: missing \"terms\"");
        ScalarFn acc = make_scalar(spec["terms"][0], n);
        for (std::size_t i = 1; i < spec["terms"].size(); ++i)
            acc = add(acc, make_scalar(spec["terms"][i], n));
        return acc;
    }
    if (type == "scale") {
        if (!spec.contains("term")) bad("scale: missing \"term\"");
        return scale(get_num(spec, "factor"), make_scalar(spec["term"], n));
    }
    bad("unknown scalar type \"" + type + "\"");
}

KFormField make_form(const Json& spec, int n) {
    if (spec.is_object() && spec.contains("type") && spec["type"] == "bump-form") {
        int k = static_cast<int>(get_num(spec, "degree"));
        if (k < 0 || k > n) bad("bump-form: degree must satisfy 0 <= k <= n");
        double R = get_num(spec, "radius");
        Vec vals = get_vec(spec, "values", binomial(n, k));
        TestForm tf = make_test_form(n, k, R, vals);
        return tf.form;
    }
    if (!spec.is_object() || !spec.contains("degree")) bad("form: missing \"degree\"");
    int k = static_cast<int>(get_num(spec, "degree"));
    if (k < 0 || k > n) bad("form: degree must satisfy 0 <= k <= n");
    int C = binomial(n, k);
    if (!spec.contains("channels") || !spec["channels"].is_array() ||
        static_cast<int>(spec["channels"].size()) != C)
        bad("form: need exactly C(n,k) = " + std::to_string(C) + " channel specs");
    KFormField K = zero_form(n, k);
    for (int r = 0; r < C; ++r) K.coeff[r] = make_scalar(spec["channels"][r], n);
    return K;
}

std::vector<std::string> vector_field_types() {
    return {"constant", "linear",        "rotation", "radial-holder",
            "gaussian-bump", "trigonometric", "sum",      "scale"};
}

std::vector<std::string> scalar_types() {
    return {"constant", "trigonometric", "gaussian-bump", "bump", "sum", "scale"};
}

} // namespace klab
