#pragma once

// Per-sample Monte Carlo kernels. Every kernel has a plain serial loop (the
// reference) and an OpenMP loop; both write one result per sample index and
// never reduce across samples, so their outputs are bit-identical.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "divprice/valuation.hpp"

namespace divprice {

class Ordering;
struct MechanismOutcome;
struct OptimalAllocation;

enum class Exec { Serial, Parallel };

/// Profiles (and permutations) drawn for a Monte Carlo estimate. Sample i is
/// drawn from substream (seed, Stream::Samples, i): profile first, then the
/// permutation when the ordering is random. Fixed orders are stored once.
struct SampleBatch {
    std::vector<ValuationProfile> profiles;
    std::vector<std::vector<std::size_t>> orders;  // one per sample, or a single fixed order
    bool random_order = false;
    std::uint64_t seed = 0;

    std::size_t size() const { return profiles.size(); }
    std::size_t agents() const { return profiles.empty() ? 0 : profiles.front().size(); }
    std::span<const std::size_t> order(std::size_t i) const {
        return random_order ? std::span<const std::size_t>(orders[i]) : std::span<const std::size_t>(orders.front());
    }
};

namespace kernels {

/// Number of OpenMP threads the parallel path would use (1 without OpenMP).
int max_threads();

SampleBatch draw_samples(std::span<const ValuationDistribution> dists, const Ordering& ordering,
                         std::size_t count, std::uint64_t seed, Exec exec);

/// min{1, sum_i y*_i(v_i, p)} per sample.
std::vector<double> sold_fractions(const SampleBatch& batch, double price, Exec exec);

/// Full mechanism run per sample.
std::vector<MechanismOutcome> simulate(const SampleBatch& batch, double price, Exec exec);

/// Welfare-optimal allocation per sample profile.
std::vector<OptimalAllocation> optimal_allocations(const SampleBatch& batch, Exec exec);

}  // namespace kernels
}  // namespace divprice
