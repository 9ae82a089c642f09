// Counter-based randomness. Every draw is a pure function of a 64-bit key
// assembled from (seed, stream coordinates), so parallel generation is
// reproducible by construction: no generator state, no draw ordering.
// The mixer is the SplitMix64 finalizer, which is bijective on 64 bits.

#pragma once

#include <cmath>
#include <cstdint>

#include "klab/linalg.hpp"

namespace klab {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Key for up to four stream coordinates. Components are mixed in rather
// than packed so there is no field-width budget to overflow.
inline std::uint64_t counter_key(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0,
                                 std::uint64_t d = 0) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ (a + 0x632be59bd9b4e019ull));
    h = mix64(h ^ (b + 0x9e6c63d0a0e4d5b5ull));
    h = mix64(h ^ (c + 0xc2b2ae3d27d4eb4full));
    h = mix64(h ^ (d + 0x165667b19e3779f9ull));
    return h;
}

// Uniform in (0,1); the offset keeps log() of it finite.
inline double u01(std::uint64_t h) {
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal via Box-Muller from two independent keys.
inline double gauss01(std::uint64_t h1, std::uint64_t h2) {
    const double u1 = u01(h1);
    const double u2 = u01(h2);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// One Gaussian addressed by stream coordinates.
inline double gauss_at(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0, std::uint64_t d = 0) {
    return gauss01(counter_key(seed, a, b, c, 2 * d), counter_key(seed, a, b, c, 2 * d + 1));
}

// Uniform point in the ball B(center, R): Gaussian direction, radius by
// the u^(1/n) volume rule. Consumes a fixed number of keys per point.
inline Vec ball_point(int n, const Vec& center, double R, std::uint64_t seed,
                      std::uint64_t index) {
    Vec g(n);
    double norm2 = 0.0;
    for (int i = 0; i < n; ++i) {
        g[i] = gauss_at(seed, index, 101, i);
        norm2 += g[i] * g[i];
    }
    double norm = std::sqrt(norm2);
    if (norm < 1e-300) {
        g.assign(n, 0.0);
        g[0] = 1.0;
        norm = 1.0;
    }
    const double u = u01(counter_key(seed, index, 102));
    const double r = R * std::pow(u, 1.0 / n);
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = center[i] + r * g[i] / norm;
    return x;
}

// Uniform in [lo, hi].
inline double uniform_at(double lo, double hi, std::uint64_t seed, std::uint64_t a,
                         std::uint64_t b = 0, std::uint64_t c = 0) {
    return lo + (hi - lo) * u01(counter_key(seed, a, b, c));
}

} // namespace klab
