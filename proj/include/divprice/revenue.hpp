#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "divprice/calibration.hpp"
#include "divprice/estimate.hpp"
#include "divprice/kernels.hpp"
#include "divprice/valuation.hpp"

namespace divprice {

/// Exact discrete distribution of a marginal value v'(x) under one agent's
/// finite-support valuation distribution.
///
/// cdf() is closed, F(t) = Pr[D <= t]. The revenue-quantile curve is
/// q * price_at_quantile(q), where price_at_quantile(q) is the largest atom d
/// with Pr[D >= d] >= q: posting marginal price d sells with probability
/// Pr[D >= d]. Its breakpoints are the atom tails.
class DerivativeDistribution {
public:
    DerivativeDistribution() = default;
    /// (value, probability) pairs in any order; equal values are merged and
    /// zero-probability atoms dropped.
    static DerivativeDistribution from_atoms(std::vector<std::pair<double, double>> atoms);

    double cdf(double t) const;
    double price_at_quantile(double q) const;
    double revenue_at_quantile(double q) const { return q * price_at_quantile(q); }

    std::size_t size() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }       // ascending
    const std::vector<double>& cumulative() const { return cum_; }      // Pr[D <= values[k]]
    const std::vector<double>& tails() const { return tails_; }         // Pr[D >= values[k]]

private:
    std::vector<double> values_;
    std::vector<double> cum_;
    std::vector<double> tails_;
};

/// Marginal-value distributions per agent at x = 0 and at the midpoints of m
/// equal cells of [0, 1].
struct DerivativeTable {
    std::size_t grid = 0;
    std::vector<double> midpoints;
    std::vector<DerivativeDistribution> at_zero;            // [agent]
    std::vector<std::vector<DerivativeDistribution>> cells; // [agent][cell]
    std::vector<bool> kinked;                               // agent support has kinked valuations

    std::size_t agents() const { return at_zero.size(); }
};

/// Rejects continuous scalar parts and unbounded v'(0).
DerivativeTable derivative_distributions(std::span<const ValuationDistribution> dists, std::size_t grid);

inline constexpr std::size_t kRegularityGridPoints = 128;

struct RegularityResult {
    bool regular = true;
    std::array<double, 3> witness_q{};  // three consecutive grid quantiles at the worst violation
    std::array<double, 3> witness_r{};
    double violation = 0.0;             // midpoint shortfall below the chord
};

/// Concavity of q * F^{-1}(1 - q) on the grid q = j/128, j = 1..128,
/// checked on consecutive triples.
RegularityResult regularity_diagnostic(const DerivativeDistribution& dist);

struct TableRegularity {
    bool regular = true;
    std::size_t checked = 0;
    std::size_t failures = 0;
    std::size_t witness_agent = 0;
    std::optional<std::size_t> witness_cell;  // nullopt: x = 0
    RegularityResult witness;
};

TableRegularity regularity_diagnostic(const DerivativeTable& table);

/// Discretised ex-ante relaxation: schedule q_i(x) per agent and cell, the
/// relaxation objective, and the derived (r_i, H_i) pair.
struct ExAnteSolution {
    std::size_t grid = 0;
    double cell_width = 0.0;
    std::vector<double> midpoints;
    std::vector<std::vector<double>> schedule;  // [agent][cell]
    double objective = 0.0;                     // revenue upper bound
    double multiplier = 0.0;                    // capacity price lambda
    double capacity_used = 0.0;                 // sum_i sum_x width q_i(x)
    std::vector<double> shares;                 // r_i = sum_x width q_i(x)
    double kappa = 1.0;
    std::vector<DerivativeDistribution> at_zero;
    bool monotone_schedule = true;              // q_i(x) nonincreasing in x for all i

    /// H_i(t) = F_{i,0}(2 kappa t)
    double transformed_cdf(std::size_t agent, double t) const { return at_zero[agent].cdf(2.0 * kappa * t); }
};

/// True when, for every agent, the marginal values of all support points are
/// proportional across x = 0 and the points `xs` (a scaled family, for
/// instance). Atom ranks and ratios are then fixed, so the per-cell choice
/// can only move to smaller quantiles as x grows and the relaxation schedule
/// is nonincreasing. Without proportionality the schedule can increase.
bool proportional_marginals(std::span<const ValuationDistribution> dists, std::span<const double> xs);

/// Lagrangian bisection on the capacity price: each cell independently picks
/// the best (tail, atom) candidate for q F^{-1}(1-q) - lambda q. At the final
/// multiplier, cells whose choice flips are mixed with a common weight so the
/// capacity constraint holds with equality; mixed cells contribute the chord
/// of their two candidates.
ExAnteSolution exante_upper_bound(const DerivativeTable& table, double kappa = 1.0);

/// 1 - prod_i (1 - E[X_i]).
double min_lemma_bound(std::span<const double> expectations);

/// Finite discrete random variable on [0, 1]: (value, probability) atoms.
struct DiscreteVariable {
    std::vector<std::pair<double, double>> atoms;
    double mean() const;
};

struct MinLemmaResult {
    double exact = 0.0;  // E[min{1, sum X_i}] by enumeration
    double bound = 0.0;  // 1 - prod (1 - E[X_i])
    bool holds = true;   // exact >= bound - 1e-12
};

inline constexpr std::size_t kMinLemmaMaxVariables = 6;
inline constexpr std::size_t kMinLemmaMaxOutcomes = 1'000'000;

/// Throws EnumerationTooLarge beyond 6 variables or 10^6 joint outcomes.
MinLemmaResult min_lemma_oracle(std::span<const DiscreteVariable> vars);

struct LinearRevenue {
    Estimate revenue;          // p E[min{1, sum y*_i}]
    Estimate sold;
    double lower_bound = 0.0;  // p (1 - prod (1 - E[y*_i]))
    bool exact = false;
};

/// Joint outcomes up to which expectations over finite supports are
/// enumerated exactly instead of sampled.
inline constexpr std::size_t kExactEnumerationLimit = 1u << 16;

/// Revenue of a single per-unit price p. Exact when the joint support is
/// small, Monte Carlo otherwise.
class RevenueCurve {
public:
    RevenueCurve(std::span<const ValuationDistribution> dists, std::size_t samples, std::uint64_t seed,
                 Exec exec = Exec::Parallel);

    LinearRevenue at(double price) const;
    /// E[y*_i(v_i, p)] per agent.
    std::vector<double> mean_demands(double price) const;
    bool exact() const { return exact_; }
    /// Max v'(0) over the supports, or +inf.
    double max_slope() const { return max_slope_; }
    const std::vector<double>& critical_prices() const { return critical_; }

private:
    bool exact_ = false;
    std::vector<std::vector<Atom>> atoms_;
    SampleBatch batch_;
    Exec exec_ = Exec::Parallel;
    double max_slope_ = 0.0;
    std::vector<double> critical_;
};

LinearRevenue linear_revenue(std::span<const ValuationDistribution> dists, double price, std::size_t samples,
                             std::uint64_t seed, Exec exec = Exec::Parallel);

struct PriceGridSpec {
    std::size_t points = 128;     // coarse log-spaced grid size (>= 64)
    double decades = 4.0;         // grid spans [p_max 10^-decades, p_max]
    double price_cap = 1e3;       // p_max when v'(0) is unbounded
};

struct BestLinearRevenue {
    double revenue = 0.0;
    double price = 0.0;
    double std_error = 0.0;
    bool exact = false;
    std::vector<CurvePoint> curve;  // coarse grid, ascending price
};

/// Coarse log grid (plus the supports' critical prices) followed by
/// golden-section refinement on the two cells adjacent to the best point.
/// The result is the best revenue found, a lower bound on the supremum.
BestLinearRevenue best_linear_revenue(std::span<const ValuationDistribution> dists, const PriceGridSpec& grid,
                                      std::size_t samples, std::uint64_t seed, Exec exec = Exec::Parallel);

struct RevenueGapReport {
    double upper_bound = 0.0;   // ex-ante relaxation objective
    BestLinearRevenue linear;
    double gap = 0.0;           // upper_bound / linear.revenue
    double certificate = 0.0;   // 2 kappa (2 kappa - 1) e
    double kappa = 1.0;
    TableRegularity regularity;
    bool certificate_holds = true;  // gap <= certificate
    bool dominance_holds = true;    // upper_bound >= R_lin - 3 stderr
    ExAnteSolution solution;
};

RevenueGapReport revenue_gap(std::span<const ValuationDistribution> dists, std::size_t grid,
                             const PriceGridSpec& prices, std::size_t samples, std::uint64_t seed,
                             Exec exec = Exec::Parallel);

/// Smallest LHS - RHS of 1 - prod(1 - t z_i) >= t (1 - prod(1 - z_i)) over
/// random tuples with k in [1, 8], t in (0, 1] and z in [0, 1]^k (a tenth of
/// the coordinates pinned to 0 and another tenth to 1).
struct ProductLemmaResult {
    double min_margin = 0.0;
    std::size_t trials = 0;
    bool holds = true;  // min_margin >= -1e-12
};

ProductLemmaResult product_lemma_check(std::size_t trials, std::uint64_t seed);

struct FeasibilityOptions {
    std::size_t price_points = 256;
    std::size_t product_trials = 10'000;
    std::uint64_t seed = 1;
};

struct FeasibilityReport {
    double bound = 0.0;                 // R = 2 kappa - 1
    double max_constraint = 0.0;        // max over p in (R, 100R] of p (1 - prod H_i(p))
    double witness_price = 0.0;
    bool constraint_holds = true;       // max_constraint <= R + 1e-6
    double max_linear_normalised = 0.0; // max over p > 1 of p (1 - prod(1 - E y*_i)) after rescaling
    double share_sum = 0.0;             // sum r_i
    bool shares_hold = true;            // share_sum <= 1 + 1e-9
    double demand_min_margin = 0.0;     // min E[y*_i] - (1 - H_i(p)) / (2 kappa - 1)
    std::size_t demand_witness_agent = 0;
    double demand_witness_price = 0.0;
    bool demand_holds = true;
    double product_min_margin = 0.0;    // min of LHS - RHS of the product inequality
    bool product_holds = true;
    std::size_t product_trials = 0;

    bool all_hold() const { return constraint_holds && shares_hold && demand_holds && product_holds; }
};

/// Checks that (r, H) derived from `solution` satisfies the anonymous-pricing
/// program with R = 2 kappa - 1 after rescaling prices by 1 / revenue_scale,
/// plus the per-agent demand bound and random instances of
/// 1 - prod(1 - t z_i) >= t (1 - prod(1 - z_i)).
FeasibilityReport feasibility_check(const ExAnteSolution& solution, std::span<const ValuationDistribution> dists,
                                    double kappa, double revenue_scale, const FeasibilityOptions& options = {});

struct LowerBoundInstance {
    ConcaveValuation valuation = ConcaveValuation::linear(1.0);
    double kappa = 0.0;
    double rho = 0.0;
    double linear_revenue = 0.0;     // best linear-pricing revenue
    double best_price = 0.0;
    double plateau = 0.0;            // 1 / rho
    double nonlinear_revenue = 0.0;  // v(1), extracted by pricing p(x) = v(x)
    double gap = 0.0;                // nonlinear_revenue / linear_revenue
    bool plateau_matches = true;     // |linear_revenue - 1/rho| <= 1e-6
    bool gap_holds = true;           // gap >= rho - 1e-6 and rho >= 1 + ln kappa - 1e-6
    std::vector<CurvePoint> curve;
};

/// Single agent with the log-capped valuation of curvature kappa > 1.
LowerBoundInstance lower_bound_instance(double kappa, const PriceGridSpec& grid = {});

}  // namespace divprice
