#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "divprice/estimate.hpp"
#include "divprice/kernels.hpp"
#include "divprice/valuation.hpp"

namespace divprice {

/// Order in which agents are approached. Agent indices are 0-based.
class Ordering {
public:
    enum class Kind { Fixed, UniformRandom };

    static Ordering fixed(std::vector<std::size_t> permutation);
    static Ordering identity(std::size_t n);
    static Ordering reverse(std::size_t n);
    /// A fresh uniform permutation per sample, drawn from that sample's stream.
    static Ordering uniform_random() { return Ordering(Kind::UniformRandom, {}); }

    Kind kind() const { return kind_; }
    bool is_random() const { return kind_ == Kind::UniformRandom; }
    const std::vector<std::size_t>& permutation() const { return permutation_; }
    /// Throws DomainError unless a fixed permutation is a bijection on [0, n).
    void validate(std::size_t n) const;

private:
    Ordering(Kind kind, std::vector<std::size_t> perm) : kind_(kind), permutation_(std::move(perm)) {}
    Kind kind_;
    std::vector<std::size_t> permutation_;
};

bool is_permutation_of(std::span<const std::size_t> perm, std::size_t n);

struct MechanismOutcome {
    double price = 0.0;
    std::vector<double> fractions;   // y_i, indexed by agent
    std::vector<double> utilities;   // v_i(y_i) - p y_i
    std::vector<double> payments;    // p y_i
    std::vector<std::size_t> permutation;
    double sold = 0.0;               // sum_i y_i
    double welfare = 0.0;            // sum_i v_i(y_i)
    double revenue = 0.0;            // p * sold
    double unconstrained_demand = 0.0;  // sum_i y*_i

    /// |sold - min{1, sum_i y*_i}|
    double identity_residual() const;
};

/// min{y*(v, p), available}
double best_response(const ConcaveValuation& v, double price, double available);

/// One run of sequential posted pricing at per-unit price `price`, visiting
/// agents in `permutation` order.
MechanismOutcome run(const ValuationProfile& profile, double price, std::span<const std::size_t> permutation);

/// Expectations over profile (and order) draws.
struct OutcomeEstimates {
    Estimate welfare;
    Estimate revenue;
    Estimate sold;
    std::vector<Estimate> utilities;
    double max_identity_residual = 0.0;
    double min_utility = 0.0;
    std::size_t runs = 0;
};

/// Sample i draws the profile, then (for random orders) the permutation,
/// from substream (seed, i).
OutcomeEstimates expected_outcome(std::span<const ValuationDistribution> dists, double price,
                                  const Ordering& ordering, std::size_t samples, std::uint64_t seed,
                                  Exec exec = Exec::Parallel);

/// Same as above over an already drawn batch (common random numbers).
OutcomeEstimates expected_outcome(const SampleBatch& batch, double price, Exec exec = Exec::Parallel);

}  // namespace divprice
