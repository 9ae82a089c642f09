// Driving noise on uniform dyadic time grids. Every Gaussian is a pure
// function of (seed, path, driver, refinement level, index), so arrays
// regenerate bit-exactly on any machine and in any order. Refinement is
// the Brownian-bridge midpoint rule: a parent increment over dt splits as
//   left  = parent/2 + (sqrt(dt)/2) Z
//   right = parent/2 - (sqrt(dt)/2) Z
// which preserves coarse increments as sums of fine ones exactly, with
// the correct conditional law (children are independent N(0, dt/2)).
// Grids are therefore restricted to base_steps * 2^level uniform steps;
// that restriction is what makes the coupling across refinement levels
// exact rather than approximate.

#pragma once

#include <cstdint>
#include <vector>

#include "klab/linalg.hpp"

namespace klab {

struct PathSpec {
    std::uint64_t seed = 0;
    int n_drivers = 1;
    double horizon = 1.0; // [0, T]
    int base_steps = 8;
    int level = 0;
    bool zero_variance = false; // degenerate mode: SDE becomes an ODE

    int steps() const { return base_steps << level; }
    double dt() const { return horizon / steps(); }
    PathSpec refined(int extra_levels = 1) const {
        PathSpec s = *this;
        s.level += extra_levels;
        return s;
    }
};

// All increments of one driver along one path, length spec.steps().
Vec brownian_increments(const PathSpec& spec, int path, int driver);

// Cumulative values W(t_j), length steps()+1, starting at 0.
Vec brownian_path(const PathSpec& spec, int path, int driver);

// Grid times t_j, length steps()+1.
Vec grid_times(const PathSpec& spec);

// Materialized ensemble (paths x drivers increment arrays).
struct BrownianPaths {
    PathSpec spec;
    int n_paths = 0;
    std::vector<std::vector<Vec>> inc; // [path][driver]

    const Vec& increments(int path, int driver) const { return inc[path][driver]; }
};

BrownianPaths generate_paths(int n_drivers, double horizon, int base_steps, int level,
                             std::uint64_t seed, int n_paths, bool zero_variance = false);

} // namespace klab
