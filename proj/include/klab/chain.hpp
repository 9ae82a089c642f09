// Chains of parameterized k-simplices and integration of k-forms over them.
// Integrals pull the form back to the reference simplex and apply a fixed
// degree-5 rule there; nothing here knows about flows, so pushed chains are
// handled by composing the parameterizations upstream.

#pragma once

#include <functional>
#include <vector>

#include "klab/fields.hpp"
#include "klab/linalg.hpp"

namespace klab {

// Nodes in reference-simplex coordinates (u_a >= 0, sum u <= 1); weights sum
// to the reference volume 1/k!.
struct RefQuadrature {
    std::vector<Vec> points;
    Vec weights;
};

// Degree-5 rules: 3-point Gauss-Legendre on the segment, the 7-point triangle
// rule, the 15-point tetrahedron rule. k outside {1,2,3} throws.
RefQuadrature reference_simplex_rule(int k);

// Smooth map from the reference k-simplex into R^n with orientation sign.
// tangent returns the k partial-derivative columns d map / d u_a; when absent
// it is replaced by central differences of map.
struct SimplexMap {
    int k = 0;
    int n = 0;
    std::function<Vec(const Vec&)> map;
    std::function<std::vector<Vec>(const Vec&)> tangent;
    double sign = 1.0;

    std::vector<Vec> tangent_at(const Vec& u) const;
};

struct Chain {
    int k = 0;
    int n = 0;
    std::vector<SimplexMap> simplices;
};

// Affine simplices from vertex lists (k+1 vertices each). Signs default to +1.
Chain simplex_chain(int n, const std::vector<std::vector<Vec>>& vertices,
                    const std::vector<double>& signs = {});
// Straight segment from a to b (k = 1).
Chain segment_chain(const Vec& a, const Vec& b);
// Axis-aligned square split into two positively oriented triangles (k = n = 2).
Chain square_chain(const Vec& corner, double side);

// det of the k x k matrix formed by rows `rows` (0-based) of the tangent
// columns; the pullback factor of channel I.
double tangent_minor(const std::vector<Vec>& columns, const std::vector<int>& rows);

// Integral of a k-form over the chain at time t. Throws on degree or
// dimension mismatch.
double integrate_over_chain(const KFormField& K, const Chain& chain, double t = 0.0);

// Gram-determinant degeneracy test for a set of tangent columns; used to
// reject rank-deficient pushed simplices.
bool tangent_rank_deficient(const std::vector<Vec>& columns, double rel_tol = 1e-18);

} // namespace klab
