#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mvap {

using Rng = std::mt19937_64;

// Independent randomness sources. One master seed expands into one engine per
// source so that changing how often one source is consumed never perturbs the others.
enum class Stream : std::uint32_t {
    Channel = 1,      // per-MVD Rice fading
    Compute = 2,      // f_MVAP / f_ECS draws
    Sinr = 3,         // Markov chain transitions
    Scenario = 4,     // per-episode packet size, distances, user requirements
    Exploration = 5,  // epsilon-greedy coin flips and random actions
    Minibatch = 6,    // replay sampling
    Init = 7,         // network weight initialisation
};

inline Rng make_stream(std::uint64_t master_seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed & 0xffffffffu),
                      static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(stream), 0x6d766170u};
    return Rng(seq);
}

// Uniform double in [0, 1) built from 53 random bits; identical on every
// standard library, unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Unbiased integer in [0, n) by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = Rng::max() - (Rng::max() % n);
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

// Standard normal via Box-Muller; portable across standard libraries.
inline double standard_normal(Rng& rng) {
    double u1;
    do {
        u1 = uniform01(rng);
    } while (u1 <= 0.0);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace mvap
