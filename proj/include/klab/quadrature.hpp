// Quadrature over axis-aligned boxes: tensor midpoint or tensor
// Gauss-Legendre nodes. Node lists are materialized once and reused; the
// weights of any grid sum to the box volume.

#pragma once

#include <functional>
#include <vector>

#include "klab/linalg.hpp"

namespace klab {

enum class QuadRule { Midpoint, GaussLegendre };

struct QuadNode {
    Vec x;
    double w;
};

struct QuadratureGrid {
    Vec lo, hi;
    int points_per_axis = 16;
    QuadRule rule = QuadRule::GaussLegendre;

    QuadratureGrid() = default;
    QuadratureGrid(Vec lo_, Vec hi_, int ppa, QuadRule r = QuadRule::GaussLegendre);

    int dim() const { return static_cast<int>(lo.size()); }
    double volume() const;
    const std::vector<QuadNode>& nodes() const; // built lazily, cached

    // Same box, finer rule; used for error estimates.
    QuadratureGrid refined(int factor = 2) const;

private:
    mutable std::vector<QuadNode> cache_;
};

// Cube [-half, half]^n.
QuadratureGrid centered_box(int n, double half, int ppa,
                            QuadRule r = QuadRule::GaussLegendre);

// 1D Gauss-Legendre nodes/weights on [-1,1]; cached per point count.
void gauss_legendre(int m, std::vector<double>& x, std::vector<double>& w);

// integral of f over the grid and a coarse-vs-fine error estimate
struct QuadValue {
    double value = 0.0;
    double error_estimate = 0.0;
};

QuadValue integrate_with_estimate(const QuadratureGrid& grid,
                                  const std::function<double(const Vec&)>& f);

} // namespace klab
