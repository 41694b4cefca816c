#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace gendice {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from raw 53-bit draws, so sampled datasets do not
/// depend on the standard library's distribution implementation.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

/// Inverse-CDF draw from unnormalized weights; falls back to the last positive entry
/// when rounding leaves the target just above the accumulated mass.
inline std::size_t sample_categorical(Rng& rng, std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    const double target = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        acc += weights[i];
        last = i;
        if (target < acc) return i;
    }
    return last;
}

inline double standard_normal(Rng& rng) {
    // Box-Muller on our own uniforms for the same portability reason as uniform01.
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace gendice
