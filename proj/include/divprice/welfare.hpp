#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "divprice/estimate.hpp"
#include "divprice/kernels.hpp"
#include "divprice/mechanism.hpp"
#include "divprice/valuation.hpp"

namespace divprice {

/// beta solves e^{1/beta} = 2 + 1/beta; rho1 = e^{-1/beta};
/// rho2 = 1 / (1 + 2 ln 2).
struct WelfareConstants {
    double beta = 0.0;
    double rho1 = 0.0;
    double rho2 = 0.0;
};

WelfareConstants solve_constants();

/// Welfare-maximising split of the item.
struct OptimalAllocation {
    std::vector<double> fractions;
    double welfare = 0.0;
    double level = 0.0;        // water level (common marginal value)
    bool degenerate = false;   // every marginal value is zero; remainder went to agent 0
};

/// Water-filling: bisect on the level lambda with x_i(lambda) = y*(v_i, lambda)
/// until total demand crosses 1. Agents whose demand is flat at the final level
/// absorb the residual in index order.
OptimalAllocation optimal_allocation(const ValuationProfile& profile);

struct WelfareRatio {
    Estimate ratio;            // E[SW] / E[SW*], delta-method standard error
    Estimate welfare;          // E[SW]
    Estimate optimal_welfare;  // E[SW*]
    double max_identity_residual = 0.0;
    double max_excess = 0.0;                  // max over runs of SW - SW*
    double max_decomposition_residual = 0.0;  // max |SW - sum u_i - p sum y_i|
    double min_utility = 0.0;
    std::size_t runs = 0;
};

WelfareRatio welfare_ratio(std::span<const ValuationDistribution> dists, double price,
                           const Ordering& ordering, std::size_t samples, std::uint64_t seed,
                           Exec exec = Exec::Parallel);

/// Ratio over a drawn batch whose optimal allocations are already known.
WelfareRatio welfare_ratio(const SampleBatch& batch, std::span<const OptimalAllocation> optimal, double price,
                           Exec exec = Exec::Parallel);

/// Estimated sides of an inequality lhs >= rhs (or rhs >= lhs), with the
/// standard error of the margin.
struct LemmaReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;

    /// The absolute 1e-12 absorbs rounding when both sides vanish.
    bool holds(double sigmas) const { return margin >= -sigmas * std_error - 1e-12; }
};

/// Utility lower bound for one agent under a fixed order:
///   E[u_i] >= beta (E[v_i(x_i)] - p E[x_i]) (1 - e^{-1/beta} - E[min{1 - e^{-1/beta}, X}])
/// with X the total unconstrained demand of the agents visited before i.
/// margin = lhs - rhs.
LemmaReport check_aux_lemma(std::span<const ValuationDistribution> dists, double price,
                            std::span<const std::size_t> permutation, std::size_t agent, double beta,
                            std::size_t samples, std::uint64_t seed, Exec exec = Exec::Parallel);

/// Under uniformly random orders:
///   E[min{alpha, X}] <= max{alpha, 1/2} E[sum_j y_j]
/// with X the unconstrained demand of i's predecessors. margin = rhs - lhs.
LemmaReport check_random_order_lemma(std::span<const ValuationDistribution> dists, double price,
                                     double alpha, std::size_t agent, std::size_t samples,
                                     std::uint64_t seed, Exec exec = Exec::Parallel);

}  // namespace divprice
