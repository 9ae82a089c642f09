#include "klab/chain.hpp"

#include <cmath>
#include <stdexcept>

#include "klab/multi_index.hpp"

namespace klab {

namespace {

RefQuadrature segment_rule() {
    // 3-point Gauss-Legendre mapped to [0,1]
    const double c = 0.5 * std::sqrt(3.0 / 5.0);
    RefQuadrature q;
    q.points = {{0.5 - c}, {0.5}, {0.5 + c}};
    q.weights = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    return q;
}

RefQuadrature triangle_rule() {
    // 7-point degree-5 rule; barycentric groups (a,b,b), weights normalized
    // to unit area then scaled by the reference area 1/2.
    const double a1 = 0.059715871789769820;
    const double b1 = 0.470142064105115090;
    const double w1 = 0.132394152788506180;
    const double a2 = 0.797426985353087320;
    const double b2 = 0.101286507323456340;
    const double w2 = 0.125939180544827150;
    RefQuadrature q;
    q.points = {{1.0 / 3.0, 1.0 / 3.0},
                {a1, b1}, {b1, a1}, {b1, b1},
                {a2, b2}, {b2, a2}, {b2, b2}};
    q.weights = {0.225, w1, w1, w1, w2, w2, w2};
    for (double& w : q.weights) w *= 0.5;
    return q;
}

RefQuadrature tet_rule() {
    // 15-point degree-5 rule (centroid + two (a,a,a) orbits + one (a,a,b,b)
    // orbit); weights already sum to the reference volume 1/6.
    const double s15 = std::sqrt(15.0);
    const double w0 = 16.0 / 810.0;
    const double a1 = (7.0 - s15) / 34.0;
    const double w1 = (2665.0 + 14.0 * s15) / 226800.0;
    const double a2 = (7.0 + s15) / 34.0;
    const double w2 = (2665.0 - 14.0 * s15) / 226800.0;
    const double a3 = 0.056350832689629156;
    const double b3 = 0.5 - a3;
    const double w3 = 5.0 / 567.0;

    RefQuadrature q;
    q.points.push_back({0.25, 0.25, 0.25});
    q.weights.push_back(w0);
    for (const double a : {a1, a2}) {
        const double b = 1.0 - 3.0 * a;
        const double w = (a == a1) ? w1 : w2;
        q.points.push_back({a, a, a});
        q.points.push_back({a, a, b});
        q.points.push_back({a, b, a});
        q.points.push_back({b, a, a});
        for (int i = 0; i < 4; ++i) q.weights.push_back(w);
    }
    const double a = a3, b = b3;
    q.points.push_back({a, a, b});
    q.points.push_back({a, b, a});
    q.points.push_back({b, a, a});
    q.points.push_back({a, b, b});
    q.points.push_back({b, a, b});
    q.points.push_back({b, b, a});
    for (int i = 0; i < 6; ++i) q.weights.push_back(w3);
    return q;
}

} // namespace

RefQuadrature reference_simplex_rule(int k) {
    switch (k) {
    case 1: return segment_rule();
    case 2: return triangle_rule();
    case 3: return tet_rule();
    default: throw std::invalid_argument("reference_simplex_rule: k must be 1, 2, or 3");
    }
}

std::vector<Vec> SimplexMap::tangent_at(const Vec& u) const {
    if (tangent) return tangent(u);
    const double h = 1e-6;
    std::vector<Vec> cols(static_cast<size_t>(k));
    for (int a = 0; a < k; ++a) {
        Vec up = u, um = u;
        up[static_cast<size_t>(a)] += h;
        um[static_cast<size_t>(a)] -= h;
        const Vec fp = map(up), fm = map(um);
        Vec col(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
            col[static_cast<size_t>(i)] = (fp[static_cast<size_t>(i)] - fm[static_cast<size_t>(i)]) / (2.0 * h);
        cols[static_cast<size_t>(a)] = std::move(col);
    }
    return cols;
}

Chain simplex_chain(int n, const std::vector<std::vector<Vec>>& vertices,
                    const std::vector<double>& signs) {
    if (vertices.empty()) throw std::invalid_argument("simplex_chain: no simplices");
    if (!signs.empty() && signs.size() != vertices.size())
        throw std::invalid_argument("simplex_chain: sign list length mismatch");
    const int k = static_cast<int>(vertices.front().size()) - 1;
    if (k < 1) throw std::invalid_argument("simplex_chain: need at least 2 vertices");

    Chain ch;
    ch.k = k;
    ch.n = n;
    for (size_t s = 0; s < vertices.size(); ++s) {
        const std::vector<Vec>& vs = vertices[s];
        if (static_cast<int>(vs.size()) != k + 1)
            throw std::invalid_argument("simplex_chain: inconsistent vertex counts");
        for (const Vec& v : vs)
            if (static_cast<int>(v.size()) != n)
                throw std::invalid_argument("simplex_chain: vertex dimension mismatch");
        SimplexMap sm;
        sm.k = k;
        sm.n = n;
        sm.sign = signs.empty() ? 1.0 : signs[s];
        sm.map = [vs, n, k](const Vec& u) {
            Vec x = vs[0];
            for (int a = 0; a < k; ++a)
                for (int i = 0; i < n; ++i)
                    x[static_cast<size_t>(i)] += u[static_cast<size_t>(a)] *
                        (vs[static_cast<size_t>(a) + 1][static_cast<size_t>(i)] - vs[0][static_cast<size_t>(i)]);
            return x;
        };
        sm.tangent = [vs, n, k](const Vec&) {
            std::vector<Vec> cols(static_cast<size_t>(k));
            for (int a = 0; a < k; ++a) {
                Vec col(static_cast<size_t>(n));
                for (int i = 0; i < n; ++i)
                    col[static_cast<size_t>(i)] = vs[static_cast<size_t>(a) + 1][static_cast<size_t>(i)] - vs[0][static_cast<size_t>(i)];
                cols[static_cast<size_t>(a)] = std::move(col);
            }
            return cols;
        };
        ch.simplices.push_back(std::move(sm));
    }
    return ch;
}

Chain segment_chain(const Vec& a, const Vec& b) {
    return simplex_chain(static_cast<int>(a.size()), {{a, b}});
}

Chain square_chain(const Vec& corner, double side) {
    if (corner.size() != 2) throw std::invalid_argument("square_chain: corner must be 2d");
    const double s = side;
    const Vec c = corner;
    const Vec c10 = {c[0] + s, c[1]};
    const Vec c01 = {c[0], c[1] + s};
    const Vec c11 = {c[0] + s, c[1] + s};
    return simplex_chain(2, {{c, c10, c11}, {c, c11, c01}});
}

double tangent_minor(const std::vector<Vec>& columns, const std::vector<int>& rows) {
    const int k = static_cast<int>(columns.size());
    if (k == 1) return columns[0][static_cast<size_t>(rows[0])];
    Mat M(k);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
            M(a, b) = columns[static_cast<size_t>(b)][static_cast<size_t>(rows[static_cast<size_t>(a)])];
    if (k == 2) return M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
    if (k == 3)
        return M(0, 0) * (M(1, 1) * M(2, 2) - M(1, 2) * M(2, 1)) -
               M(0, 1) * (M(1, 0) * M(2, 2) - M(1, 2) * M(2, 0)) +
               M(0, 2) * (M(1, 0) * M(2, 1) - M(1, 1) * M(2, 0));
    try {
        return det(M);
    } catch (const std::runtime_error&) {
        return 0.0;
    }
}

double integrate_over_chain(const KFormField& K, const Chain& chain, double t) {
    if (K.n != chain.n) throw std::invalid_argument("integrate_over_chain: dimension mismatch");
    if (K.k != chain.k) throw std::invalid_argument("integrate_over_chain: degree mismatch");
    const RefQuadrature rule = reference_simplex_rule(chain.k);
    const MultiIndexSet& idx = K.idx;

    double total = 0.0;
    for (const SimplexMap& sm : chain.simplices) {
        double acc = 0.0;
        for (size_t q = 0; q < rule.points.size(); ++q) {
            const Vec& u = rule.points[q];
            const Vec x = sm.map(u);
            const std::vector<Vec> cols = sm.tangent_at(u);
            double val = 0.0;
            for (int r = 0; r < idx.count(); ++r) {
                std::vector<int> rows = idx[r];
                for (int& e : rows) --e; // 1-based tuples to 0-based rows
                val += K.coeff[static_cast<size_t>(r)].value(t, x) * tangent_minor(cols, rows);
            }
            acc += rule.weights[q] * val;
        }
        total += sm.sign * acc;
    }
    return total;
}

bool tangent_rank_deficient(const std::vector<Vec>& columns, double rel_tol) {
    const int k = static_cast<int>(columns.size());
    Mat G(k);
    double scale = 1.0;
    for (int a = 0; a < k; ++a) {
        for (int b = 0; b < k; ++b) G(a, b) = dot(columns[static_cast<size_t>(a)], columns[static_cast<size_t>(b)]);
        scale *= std::max(G(a, a), 1e-300);
    }
    double g;
    try {
        g = det(G);
    } catch (const std::runtime_error&) {
        return true;
    }
    return !(g > rel_tol * scale);
}

} // namespace klab
