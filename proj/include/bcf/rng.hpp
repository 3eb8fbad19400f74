#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "bcf/errors.hpp"

// Deterministic randomness utilities.
//
// Every stochastic component of the library draws through the helpers below
// so that a run is reproducible from a single master seed across platforms
// and standard-library versions. Distribution shaping is done explicitly
// (Box-Muller, inverse CDF) because the std:: distribution adapters are
// allowed to differ between implementations.
//
// Stream derivation: substream seeds are formed by folding tag words into a
// splitmix64 chain, so (master, k, agent, purpose) tuples map to
// well-separated mt19937_64 seeds.

namespace bcf {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

// Purpose tags keep independent substreams from colliding even when the
// remaining tag words coincide.
enum class Stream : std::uint64_t {
    TruthProcess = 1,
    Measurement = 2,
    KernelMonteCarlo = 3,
    ChannelFit = 4,
    ChannelParticles = 5,
    Scenario = 6,
    Test = 7,
};

// Derive a substream seed from a master seed and up to three tag words.
inline std::uint64_t derive_seed(std::uint64_t master, Stream purpose,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t s = master;
    detail::splitmix64(s);
    s ^= 0x6a09e667f3bcc909ULL + static_cast<std::uint64_t>(purpose);
    detail::splitmix64(s);
    s ^= a * 0x100000001b3ULL + 0xcbf29ce484222325ULL;
    detail::splitmix64(s);
    s ^= b * 0xff51afd7ed558ccdULL + 0x2545f4914f6cdd1dULL;
    return detail::splitmix64(s);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

// Uniform double in [0, 1) built from the top 53 bits of one output word.
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Uniform double in [lo, hi).
inline double uniform(std::mt19937_64& gen, double lo, double hi) {
    return lo + (hi - lo) * uniform01(gen);
}

// Standard normal via Box-Muller. Draws two words per call (no cached
// second variate, so the consumption pattern stays obvious).
inline double normal01(std::mt19937_64& gen) {
    double u1 = uniform01(gen);
    double u2 = uniform01(gen);
    // Guard the log: push u1 away from exact zero.
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double normal(std::mt19937_64& gen, double mean, double stddev) {
    return mean + stddev * normal01(gen);
}

// Sample an index from unnormalized nonnegative weights by inverse CDF.
inline std::size_t sample_index(std::mt19937_64& gen, std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw AllZero("sample_index: weights sum to zero");
    const double u = uniform01(gen) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return i;
    }
    return weights.size() - 1; // rounding fell past the last bin
}

} // namespace bcf
