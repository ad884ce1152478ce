#pragma once

#include <cstdint>
#include <random>

namespace divprice {

using Engine = std::mt19937_64;

/// Independent random streams derived from a single experiment seed.
enum class Stream : std::uint64_t {
    Samples = 1,        // per-sample profile draw followed by its order draw
    FixedOrders = 2,    // random fixed permutations chosen once per experiment
    Instances = 3,      // random instance generation in test suites
    LemmaTuples = 4,    // random (t, z) tuples for the product inequality
};

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of substream (stream, index) under `seed`. Sample i of a Monte Carlo
/// estimate always uses substream (Stream::Samples, i), so results do not
/// depend on how samples are distributed over threads.
constexpr std::uint64_t substream_seed(std::uint64_t seed, Stream stream,
                                       std::uint64_t index) noexcept {
    return mix64(mix64(seed ^ mix64(static_cast<std::uint64_t>(stream))) + index);
}

inline Engine make_engine(std::uint64_t seed, Stream stream, std::uint64_t index) {
    return Engine(substream_seed(seed, stream, index));
}

inline double uniform01(Engine& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace divprice
