#include "divprice/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "divprice/errors.hpp"

namespace divprice {

bool is_permutation_of(std::span<const std::size_t> perm, std::size_t n) {
    if (perm.size() != n) return false;
    std::vector<bool> seen(n, false);
    for (std::size_t i : perm) {
        if (i >= n || seen[i]) return false;
        seen[i] = true;
    }
    return true;
}

Ordering Ordering::fixed(std::vector<std::size_t> permutation) {
    if (!is_permutation_of(permutation, permutation.size())) {
        throw DomainError("ordering: not a permutation of 0..n-1");
    }
    return Ordering(Kind::Fixed, std::move(permutation));
}

Ordering Ordering::identity(std::size_t n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    return Ordering(Kind::Fixed, std::move(perm));
}

Ordering Ordering::reverse(std::size_t n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.rbegin(), perm.rend(), std::size_t{0});
    return Ordering(Kind::Fixed, std::move(perm));
}

void Ordering::validate(std::size_t n) const {
    if (kind_ == Kind::Fixed && !is_permutation_of(permutation_, n)) {
        throw DomainError("ordering: fixed permutation does not match the number of agents (" +
                          std::to_string(n) + ")");
    }
}

double MechanismOutcome::identity_residual() const {
    return std::abs(sold - std::min(1.0, unconstrained_demand));
}

double best_response(const ConcaveValuation& v, double price, double available) {
    if (!(available >= 0.0 && available <= 1.0)) {
        throw DomainError("best_response: available fraction outside [0,1]");
    }
    return std::min(v.inv_deriv(price), available);
}

MechanismOutcome run(const ValuationProfile& profile, double price, std::span<const std::size_t> permutation) {
    const std::size_t n = profile.size();
    if (!(price >= 0.0)) throw DomainError("run: price must be >= 0");
    if (!is_permutation_of(permutation, n)) throw DomainError("run: permutation does not match the profile");

    MechanismOutcome out;
    out.price = price;
    out.fractions.assign(n, 0.0);
    out.utilities.assign(n, 0.0);
    out.payments.assign(n, 0.0);
    out.permutation.assign(permutation.begin(), permutation.end());

    double remaining = 1.0;
    for (std::size_t i : permutation) {
        const double demand = profile[i].inv_deriv(price);
        out.unconstrained_demand += demand;
        const double y = std::min(demand, remaining);
        remaining = std::max(0.0, remaining - y);
        out.fractions[i] = y;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double y = out.fractions[i];
        const double value = profile[i].value(y);
        out.payments[i] = price * y;
        out.utilities[i] = value - out.payments[i];
        out.sold += y;
        out.welfare += value;
    }
    out.revenue = price * out.sold;
    return out;
}

OutcomeEstimates expected_outcome(const SampleBatch& batch, double price, Exec exec) {
    const auto outcomes = kernels::simulate(batch, price, exec);
    const std::size_t m = outcomes.size();
    const std::size_t n = batch.agents();

    std::vector<double> welfare(m), revenue(m), sold(m), util(m);
    OutcomeEstimates est;
    est.runs = m;
    for (std::size_t s = 0; s < m; ++s) {
        welfare[s] = outcomes[s].welfare;
        revenue[s] = outcomes[s].revenue;
        sold[s] = outcomes[s].sold;
        est.max_identity_residual = std::max(est.max_identity_residual, outcomes[s].identity_residual());
        for (double u : outcomes[s].utilities) est.min_utility = std::min(est.min_utility, u);
    }
    est.welfare = mean_estimate(welfare, batch.seed);
    est.revenue = mean_estimate(revenue, batch.seed);
    est.sold = mean_estimate(sold, batch.seed);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t s = 0; s < m; ++s) util[s] = outcomes[s].utilities[i];
        est.utilities.push_back(mean_estimate(util, batch.seed));
    }
    return est;
}

OutcomeEstimates expected_outcome(std::span<const ValuationDistribution> dists, double price,
                                  const Ordering& ordering, std::size_t samples, std::uint64_t seed,
                                  Exec exec) {
    if (samples == 0) throw DomainError("expected_outcome: samples must be >= 1");
    const SampleBatch batch = kernels::draw_samples(dists, ordering, samples, seed, exec);
    return expected_outcome(batch, price, exec);
}

}  // namespace divprice
