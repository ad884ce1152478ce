#include <doctest.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <vector>

#include "divprice/errors.hpp"
#include "divprice/welfare.hpp"
#include "oracles.hpp"

using namespace divprice;
using doctest::Approx;

namespace {

ValuationDistribution point(ConcaveValuation v) { return ValuationDistribution::point_mass(std::move(v)); }

ConcaveValuation random_smooth(Engine& rng) {
    switch (rng() % 3) {
        case 0: return ConcaveValuation::power(0.2 + 2 * uniform01(rng), 0.1 + 0.9 * uniform01(rng));
        case 1: return ConcaveValuation::linear(0.1 + 2 * uniform01(rng));
        default: return ConcaveValuation::power(0.2 + uniform01(rng), 0.3 + 0.6 * uniform01(rng));
    }
}

ConcaveValuation random_any(Engine& rng) {
    if (rng() % 3 != 0) return random_smooth(rng);
    const double s1 = 0.5 + 2 * uniform01(rng);
    const double s2 = s1 * uniform01(rng);
    const double k = 0.1 + 0.8 * uniform01(rng);
    const std::vector<std::pair<double, double>> pts{{0, 0}, {k, s1 * k}, {1, s1 * k + s2 * (1 - k)}};
    return ConcaveValuation::piecewise_linear(pts);
}

}  // namespace

TEST_CASE("constants") {
    const auto start = std::chrono::steady_clock::now();
    const WelfareConstants k = solve_constants();
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(elapsed < 1e-3);
    CHECK(k.beta == Approx(oracle::beta_newton()).epsilon(1e-12));
    CHECK(std::abs(k.beta - 0.872453) < 5e-7);
    CHECK(std::abs(k.rho1 - 0.317844) < 5e-7);
    CHECK(std::abs(k.rho2 - 0.41906) < 5e-6);
    CHECK(std::exp(1.0 / k.beta) == Approx(2.0 + 1.0 / k.beta).epsilon(1e-12));
}

TEST_CASE("optimal allocation examples") {
    const auto a = optimal_allocation(ValuationProfile({ConcaveValuation::linear(2), ConcaveValuation::linear(1)}));
    CHECK(a.fractions[0] == Approx(1.0));
    CHECK(a.fractions[1] == Approx(0.0));
    CHECK(a.welfare == Approx(2.0));

    const auto b =
        optimal_allocation(ValuationProfile({ConcaveValuation::power(1, 0.5), ConcaveValuation::power(1, 0.5)}));
    CHECK(b.fractions[0] == Approx(0.5));
    CHECK(b.fractions[1] == Approx(0.5));
    CHECK(b.welfare == Approx(std::sqrt(2.0)));

    const auto c =
        optimal_allocation(ValuationProfile({ConcaveValuation::power(1, 0.5), ConcaveValuation::linear(1)}));
    const double brute =
        oracle::brute_force_welfare({[](double x) { return std::sqrt(x); }, [](double x) { return x; }}, 1e-4);
    CHECK(c.fractions[0] == Approx(0.25));
    CHECK(c.fractions[1] == Approx(0.75));
    CHECK(c.welfare == Approx(1.25));
    CHECK(std::abs(c.welfare - brute) < 1e-6);

    // equal flat slopes: residual to the lowest index
    const auto d = optimal_allocation(ValuationProfile({ConcaveValuation::linear(1), ConcaveValuation::linear(1)}));
    CHECK(d.fractions[0] + d.fractions[1] == Approx(1.0));
    CHECK(d.welfare == Approx(1.0));

    const auto z = optimal_allocation(ValuationProfile({ConcaveValuation::linear(0), ConcaveValuation::linear(0)}));
    CHECK(z.degenerate);
    CHECK(z.welfare == 0.0);
    CHECK(z.fractions[0] + z.fractions[1] <= 1.0 + 1e-12);
}

TEST_CASE("water filling against brute force and KKT") {
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        Engine rng = make_engine(21, Stream::Instances, trial);
        const std::size_t n = 2 + rng() % 2;
        std::vector<ConcaveValuation> vs;
        for (std::size_t i = 0; i < n; ++i) vs.push_back(random_any(rng));
        const ValuationProfile prof(vs);
        const OptimalAllocation opt = optimal_allocation(prof);
        std::vector<std::function<double(double)>> fs;
        for (const auto& v : vs) fs.emplace_back([v](double x) { return v.value(std::clamp(x, 0.0, 1.0)); });
        const double brute = oracle::brute_force_welfare(fs, 1e-4);
        CHECK(opt.welfare >= brute - 1e-3);
        CHECK(opt.welfare <= brute + 1e-3);
        double total = 0.0;
        for (double x : opt.fractions) total += x;
        CHECK(total <= 1.0 + 1e-9);
        if (opt.level > 0.0) CHECK(total == Approx(1.0).epsilon(1e-6));
    }

    for (std::uint64_t trial = 0; trial < 200; ++trial) {
        Engine rng = make_engine(22, Stream::Instances, trial);
        const std::size_t n = 2 + rng() % 7;
        std::vector<ConcaveValuation> vs;
        for (std::size_t i = 0; i < n; ++i) {
            vs.push_back(ConcaveValuation::power(0.2 + 2 * uniform01(rng), 0.1 + 0.85 * uniform01(rng)));
        }
        const OptimalAllocation opt = optimal_allocation(ValuationProfile(vs));
        const double lambda = opt.level;
        const double tol = 1e-6 * std::max(1.0, lambda);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = opt.fractions[i];
            if (x > 0.0 && x < 1.0) CHECK(std::abs(vs[i].deriv(x) - lambda) <= tol);
            if (x == 0.0) CHECK(vs[i].deriv(0.0) <= lambda + tol);
            if (x == 1.0) CHECK(vs[i].deriv(1.0) >= lambda - tol);
        }
    }
}

TEST_CASE("welfare ratio examples") {
    const std::vector<ValuationDistribution> lin{point(ConcaveValuation::linear(1))};
    const auto a = welfare_ratio(lin, 0.5, Ordering::identity(1), 10, 1);
    CHECK(a.ratio.mean == Approx(1.0));

    const std::vector<ValuationDistribution> pw{point(ConcaveValuation::power(1, 0.5))};
    const auto b = welfare_ratio(pw, 1.0, Ordering::identity(1), 10, 1);
    CHECK(b.welfare.mean == Approx(0.5));
    CHECK(b.optimal_welfare.mean == Approx(1.0));
    CHECK(b.ratio.mean == Approx(0.5));
    CHECK(b.ratio.std_error == 0.0);
}

TEST_CASE("orderings matter once the item runs out") {
    const std::vector<ValuationDistribution> d{
        ValuationDistribution::scaled_uniform(ConcaveValuation::linear(1), 0.1, 1.0),
        ValuationDistribution::scaled_uniform(ConcaveValuation::power(1, 0.5), 1.0, 3.0)};
    const auto fwd = welfare_ratio(d, 0.05, Ordering::identity(2), 2000, 4);
    const auto rev = welfare_ratio(d, 0.05, Ordering::reverse(2), 2000, 4);
    CHECK(fwd.welfare.mean != rev.welfare.mean);
    CHECK(fwd.max_identity_residual <= 1e-12);
    CHECK(rev.max_excess <= 1e-9);
    CHECK(fwd.max_decomposition_residual <= 1e-9);
}

TEST_CASE("relabelling agents leaves the random-order ratio unchanged in distribution") {
    const auto a = ValuationDistribution::scaled_uniform(ConcaveValuation::power(1, 0.4), 0.5, 1.5);
    const auto b = ValuationDistribution::scaled_uniform(ConcaveValuation::linear(1), 0.2, 1.2);
    const auto c = ValuationDistribution::scaled_uniform(ConcaveValuation::log_cap(3), 0.5, 2.0);
    const std::vector<ValuationDistribution> abc{a, b, c}, cab{c, a, b};
    const auto r1 = welfare_ratio(abc, 0.6, Ordering::uniform_random(), 40000, 1);
    const auto r2 = welfare_ratio(cab, 0.6, Ordering::uniform_random(), 40000, 2);
    const double se = std::hypot(r1.ratio.std_error, r2.ratio.std_error);
    CHECK(std::abs(r1.ratio.mean - r2.ratio.mean) <= 4 * se);
}

TEST_CASE("utility lemma examples") {
    const std::vector<ValuationDistribution> one{point(ConcaveValuation::linear(1))};
    const std::vector<std::size_t> perm{0};
    const auto r = check_aux_lemma(one, 0.5, perm, 0, 1.0, 10, 1);
    CHECK(r.lhs == Approx(0.5));
    CHECK(r.rhs == Approx(0.5 * (1.0 - std::exp(-1.0))));
    CHECK(r.margin > 0.0);

    // surplus at the optimum is negative: the bound is vacuous
    const std::vector<ValuationDistribution> cheap{point(ConcaveValuation::linear(0.5)),
                                                   point(ConcaveValuation::linear(0.2))};
    const std::vector<std::size_t> ord{0, 1};
    CHECK(check_aux_lemma(cheap, 1.0, ord, 0, 0.87, 10, 1).margin >= 0.0);
    CHECK_THROWS_AS(check_aux_lemma(one, 0.5, perm, 1, 1.0, 10, 1), DomainError);
    CHECK_THROWS_AS(check_aux_lemma(one, 0.5, perm, 0, 0.0, 10, 1), DomainError);
}

TEST_CASE("random order lemma examples") {
    const std::vector<ValuationDistribution> one{point(ConcaveValuation::linear(1))};
    const auto a = check_random_order_lemma(one, 0.5, 1.0, 0, 100, 1);
    CHECK(a.lhs == 0.0);
    CHECK(a.rhs >= 0.0);

    const std::vector<ValuationDistribution> two{point(ConcaveValuation::linear(2)), point(ConcaveValuation::linear(2))};
    const auto b = check_random_order_lemma(two, 1.0, 1.0, 0, 200000, 3);
    CHECK(std::abs(b.lhs - 0.5) <= 3 * b.std_error + 1e-12);
    CHECK(b.rhs == Approx(1.0));
    CHECK(std::abs(b.margin - 0.5) <= 3 * b.std_error + 1e-12);
    CHECK(b.holds(3.0));
}

TEST_CASE("lemmas hold statistically on random instances") {
    const WelfareConstants k = solve_constants();
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        Engine rng = make_engine(31, Stream::Instances, trial);
        const std::size_t n = 2 + rng() % 4;
        std::vector<ValuationDistribution> d;
        for (std::size_t i = 0; i < n; ++i) {
            d.push_back(ValuationDistribution::finite_support(
                {{random_any(rng), 0.5}, {random_smooth(rng), 0.5}}));
        }
        const double p = 0.1 + uniform01(rng);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        const std::size_t agent = rng() % n;
        CHECK(check_aux_lemma(d, p, perm, agent, k.beta, 3000, trial).holds(3.0));
        CHECK(check_random_order_lemma(d, p, 0.5, agent, 3000, trial).holds(3.0));
    }
}
