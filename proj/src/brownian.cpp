#include "klab/brownian.hpp"

#include <cmath>
#include <stdexcept>

#include "klab/rng.hpp"

namespace klab {

namespace {

// Stream tags keep level-0 draws and bridge draws in disjoint key spaces.
constexpr std::uint64_t kBaseStream = 1;
constexpr std::uint64_t kBridgeStream = 2;

} // namespace

Vec brownian_increments(const PathSpec& spec, int path, int driver) {
    if (spec.base_steps < 1) throw std::invalid_argument("brownian: base_steps must be >= 1");
    if (spec.level < 0) throw std::invalid_argument("brownian: level must be >= 0");
    if (!(spec.horizon > 0.0)) throw std::invalid_argument("brownian: horizon must be > 0");

    const std::uint64_t p = static_cast<std::uint64_t>(path);
    const std::uint64_t d = static_cast<std::uint64_t>(driver);

    if (spec.zero_variance) return Vec(spec.steps(), 0.0);

    // level 0
    Vec cur(spec.base_steps);
    const double dt0 = spec.horizon / spec.base_steps;
    const double s0 = std::sqrt(dt0);
    for (int i = 0; i < spec.base_steps; ++i)
        cur[i] = s0 * gauss_at(spec.seed, kBaseStream, p, d, static_cast<std::uint64_t>(i));

    // bridge refinements
    for (int lev = 1; lev <= spec.level; ++lev) {
        const int parent_steps = static_cast<int>(cur.size());
        const double parent_dt = spec.horizon / parent_steps;
        const double half_sd = 0.5 * std::sqrt(parent_dt);
        Vec next(2 * parent_steps);
        for (int i = 0; i < parent_steps; ++i) {
            const std::uint64_t key_idx =
                (static_cast<std::uint64_t>(lev) << 40) ^ static_cast<std::uint64_t>(i);
            const double z = gauss_at(spec.seed, kBridgeStream, p, d, key_idx);
            next[2 * i] = 0.5 * cur[i] + half_sd * z;
            next[2 * i + 1] = 0.5 * cur[i] - half_sd * z;
        }
        cur.swap(next);
    }
    return cur;
}

Vec brownian_path(const PathSpec& spec, int path, int driver) {
    const Vec inc = brownian_increments(spec, path, driver);
    Vec w(inc.size() + 1, 0.0);
    for (size_t i = 0; i < inc.size(); ++i) w[i + 1] = w[i] + inc[i];
    return w;
}

Vec grid_times(const PathSpec& spec) {
    const int m = spec.steps();
    Vec t(m + 1);
    for (int i = 0; i <= m; ++i) t[i] = spec.horizon * i / m;
    return t;
}

BrownianPaths generate_paths(int n_drivers, double horizon, int base_steps, int level,
                             std::uint64_t seed, int n_paths, bool zero_variance) {
    if (n_drivers < 0) throw std::invalid_argument("generate_paths: n_drivers < 0");
    if (n_paths < 1) throw std::invalid_argument("generate_paths: n_paths < 1");
    BrownianPaths bp;
    bp.spec.seed = seed;
    bp.spec.n_drivers = n_drivers;
    bp.spec.horizon = horizon;
    bp.spec.base_steps = base_steps;
    bp.spec.level = level;
    bp.spec.zero_variance = zero_variance;
    bp.n_paths = n_paths;
    bp.inc.resize(n_paths);
    for (int p = 0; p < n_paths; ++p) {
        bp.inc[p].resize(n_drivers);
        for (int d = 0; d < n_drivers; ++d)
            bp.inc[p][d] = brownian_increments(bp.spec, p, d);
    }
    return bp;
}

} // namespace klab
