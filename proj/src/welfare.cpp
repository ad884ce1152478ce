#include "divprice/welfare.hpp"

#include <algorithm>
#include <cmath>

#include "divprice/errors.hpp"

namespace divprice {

namespace {

constexpr int kMaxLevelIterations = 200;

double total_demand(const ValuationProfile& profile, double level) {
    double sum = 0.0;
    for (const auto& v : profile.valuations()) sum += v.inv_deriv(level);
    return sum;
}

double predecessor_demand(const ValuationProfile& profile, std::span<const std::size_t> order,
                          std::size_t agent, double price) {
    double sum = 0.0;
    for (std::size_t j : order) {
        if (j == agent) break;
        sum += profile[j].inv_deriv(price);
    }
    return sum;
}

void check_agent(std::size_t agent, std::size_t n) {
    if (agent >= n) {
        throw DomainError("agent index " + std::to_string(agent) + " out of range for " + std::to_string(n) +
                          " agents");
    }
}

}  // namespace

WelfareConstants solve_constants() {
    // e^{1/beta} - 2 - 1/beta is decreasing in beta on [0.5, 2]
    double lo = 0.5;
    double hi = 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        const double s = 1.0 / mid;
        if (std::exp(s) - 2.0 - s > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    WelfareConstants k;
    k.beta = 0.5 * (lo + hi);
    k.rho1 = std::exp(-1.0 / k.beta);
    k.rho2 = 1.0 / (1.0 + 2.0 * std::log(2.0));
    return k;
}

OptimalAllocation optimal_allocation(const ValuationProfile& profile) {
    const std::size_t n = profile.size();
    if (n == 0) throw DomainError("optimal_allocation: empty profile");

    OptimalAllocation out;
    out.fractions.assign(n, 0.0);

    double top = 0.0;
    for (const auto& v : profile.valuations()) top = std::max(top, v.deriv(0.0));

    double lo = 0.0;
    double hi = 0.0;
    if (top > 0.0 && total_demand(profile, 0.0) > 1.0) {
        hi = std::isfinite(top) ? top : 1.0;
        while (total_demand(profile, hi) > 1.0) hi *= 2.0;
        for (int it = 0; it < kMaxLevelIterations; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid == lo || mid == hi || hi - lo <= 1e-15 * hi) break;
            if (total_demand(profile, mid) > 1.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }

    double used = 0.0;
    // The cap only binds when every marginal value is zero and each agent
    // would take the whole item.
    for (std::size_t i = 0; i < n; ++i) {
        out.fractions[i] = std::min(profile[i].inv_deriv(hi), std::max(0.0, 1.0 - used));
        used += out.fractions[i];
    }
    // Flat stretches of demand at the level (linear pieces, or zero
    // marginal value) take the residual in index order.
    double residual = 1.0 - used;
    for (std::size_t i = 0; i < n && residual > 0.0; ++i) {
        const double room = profile[i].inv_deriv(lo) - out.fractions[i];
        const double add = std::clamp(room, 0.0, residual);
        out.fractions[i] += add;
        residual -= add;
    }

    out.level = hi;
    out.degenerate = !(top > 0.0);
    if (out.degenerate) out.level = 0.0;
    for (std::size_t i = 0; i < n; ++i) out.welfare += profile[i].value(out.fractions[i]);
    return out;
}

WelfareRatio welfare_ratio(const SampleBatch& batch, std::span<const OptimalAllocation> optimal, double price,
                           Exec exec) {
    if (optimal.size() != batch.size()) throw DomainError("welfare_ratio: optimal allocations do not match batch");
    const auto outcomes = kernels::simulate(batch, price, exec);
    const std::size_t m = outcomes.size();

    WelfareRatio r;
    r.runs = m;
    std::vector<double> sw(m), opt(m);
    for (std::size_t s = 0; s < m; ++s) {
        const auto& o = outcomes[s];
        sw[s] = o.welfare;
        opt[s] = optimal[s].welfare;
        r.max_identity_residual = std::max(r.max_identity_residual, o.identity_residual());
        r.max_excess = std::max(r.max_excess, sw[s] - opt[s]);
        double utility_sum = 0.0;
        for (double u : o.utilities) {
            utility_sum += u;
            r.min_utility = std::min(r.min_utility, u);
        }
        r.max_decomposition_residual =
            std::max(r.max_decomposition_residual, std::abs(o.welfare - utility_sum - price * o.sold));
    }
    r.welfare = mean_estimate(sw, batch.seed);
    r.optimal_welfare = mean_estimate(opt, batch.seed);
    r.ratio = ratio_estimate(sw, opt, batch.seed);
    return r;
}

WelfareRatio welfare_ratio(std::span<const ValuationDistribution> dists, double price, const Ordering& ordering,
                           std::size_t samples, std::uint64_t seed, Exec exec) {
    if (samples == 0) throw DomainError("welfare_ratio: samples must be >= 1");
    const SampleBatch batch = kernels::draw_samples(dists, ordering, samples, seed, exec);
    const auto optimal = kernels::optimal_allocations(batch, exec);
    return welfare_ratio(batch, optimal, price, exec);
}

LemmaReport check_aux_lemma(std::span<const ValuationDistribution> dists, double price,
                            std::span<const std::size_t> permutation, std::size_t agent, double beta,
                            std::size_t samples, std::uint64_t seed, Exec exec) {
    if (!(beta > 0.0)) throw DomainError("check_aux_lemma: beta must be > 0");
    if (samples == 0) throw DomainError("check_aux_lemma: samples must be >= 1");
    check_agent(agent, dists.size());
    const Ordering ordering = Ordering::fixed({permutation.begin(), permutation.end()});
    const SampleBatch batch = kernels::draw_samples(dists, ordering, samples, seed, exec);
    const auto optimal = kernels::optimal_allocations(batch, exec);
    const auto outcomes = kernels::simulate(batch, price, exec);

    const double cap = 1.0 - std::exp(-1.0 / beta);
    const std::size_t m = batch.size();
    std::vector<double> u(m), a(m), b(m), mm(m);
    for (std::size_t s = 0; s < m; ++s) {
        const auto& profile = batch.profiles[s];
        u[s] = outcomes[s].utilities[agent];
        b[s] = optimal[s].fractions[agent];
        a[s] = profile[agent].value(b[s]);
        // integral_0^cap Pr[X >= t] dt = E[min{cap, X}]
        mm[s] = std::min(cap, predecessor_demand(profile, batch.order(s), agent, price));
    }
    const Estimate lu = mean_estimate(u, seed);
    const Estimate ea = mean_estimate(a, seed);
    const Estimate eb = mean_estimate(b, seed);
    const Estimate em = mean_estimate(mm, seed);

    const double surplus = ea.mean - price * eb.mean;
    const double slack = cap - em.mean;

    LemmaReport rep;
    rep.samples = m;
    rep.lhs = lu.mean;
    rep.rhs = beta * surplus * slack;
    rep.margin = rep.lhs - rep.rhs;
    if (m > 1) {
        double ss = 0.0;
        for (std::size_t s = 0; s < m; ++s) {
            const double psi = (u[s] - lu.mean) - beta * slack * ((a[s] - ea.mean) - price * (b[s] - eb.mean)) +
                               beta * surplus * (mm[s] - em.mean);
            ss += psi * psi;
        }
        const double n = static_cast<double>(m);
        rep.std_error = std::sqrt(ss / (n - 1.0) / n);
    }
    return rep;
}

LemmaReport check_random_order_lemma(std::span<const ValuationDistribution> dists, double price, double alpha,
                                     std::size_t agent, std::size_t samples, std::uint64_t seed, Exec exec) {
    if (!(alpha > 0.0)) throw DomainError("check_random_order_lemma: alpha must be > 0");
    if (samples == 0) throw DomainError("check_random_order_lemma: samples must be >= 1");
    check_agent(agent, dists.size());
    const SampleBatch batch = kernels::draw_samples(dists, Ordering::uniform_random(), samples, seed, exec);
    const auto outcomes = kernels::simulate(batch, price, exec);

    const double factor = std::max(alpha, 0.5);
    const std::size_t m = batch.size();
    std::vector<double> l(m), r(m), d(m);
    for (std::size_t s = 0; s < m; ++s) {
        l[s] = std::min(alpha, predecessor_demand(batch.profiles[s], batch.order(s), agent, price));
        r[s] = factor * outcomes[s].sold;
        d[s] = r[s] - l[s];
    }
    LemmaReport rep;
    rep.samples = m;
    rep.lhs = mean_estimate(l, seed).mean;
    rep.rhs = mean_estimate(r, seed).mean;
    const Estimate diff = mean_estimate(d, seed);
    rep.margin = diff.mean;
    rep.std_error = diff.std_error;
    return rep;
}

}  // namespace divprice
