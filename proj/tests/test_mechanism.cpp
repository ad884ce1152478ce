#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "divprice/errors.hpp"
#include "divprice/mechanism.hpp"
#include "oracles.hpp"

using namespace divprice;
using doctest::Approx;

namespace {

ValuationDistribution point(ConcaveValuation v) { return ValuationDistribution::point_mass(std::move(v)); }

ValuationProfile profile(std::initializer_list<ConcaveValuation> vs) { return ValuationProfile(vs); }

}  // namespace

TEST_CASE("best response") {
    CHECK(best_response(ConcaveValuation::linear(2), 1.0, 0.3) == 0.3);
    CHECK(best_response(ConcaveValuation::linear(0.5), 1.0, 0.3) == 0.0);
    CHECK(best_response(ConcaveValuation::power(1, 0.5), 1.0, 0.1) == Approx(0.1));
    CHECK(best_response(ConcaveValuation::power(1, 0.5), 1.0, 1.0) == Approx(0.25));
    CHECK_THROWS_AS(best_response(ConcaveValuation::linear(1), 1.0, 1.5), DomainError);
}

TEST_CASE("single runs") {
    const std::vector<std::size_t> order{0, 1};
    const auto a = run(profile({ConcaveValuation::linear(2), ConcaveValuation::linear(3)}), 1.0, order);
    CHECK(a.fractions == std::vector<double>{1.0, 0.0});
    CHECK(a.revenue == Approx(1.0));
    CHECK(a.welfare == Approx(2.0));

    const auto pp = profile({ConcaveValuation::power(1, 0.5), ConcaveValuation::power(1, 0.5)});
    for (const auto& perm : {std::vector<std::size_t>{0, 1}, std::vector<std::size_t>{1, 0}}) {
        const auto b = run(pp, 1.0, perm);
        CHECK(b.fractions[0] == Approx(0.25));
        CHECK(b.fractions[1] == Approx(0.25));
        CHECK(b.revenue == Approx(0.5));
        CHECK(b.welfare == Approx(1.0));
    }

    const auto c = run(pp, 0.0, order);
    CHECK(c.sold == Approx(1.0));

    const auto none = run(profile({ConcaveValuation::linear(1), ConcaveValuation::log_cap(3)}), 3.5, order);
    CHECK(none.sold == 0.0);
    CHECK(none.revenue == 0.0);

    CHECK_THROWS_AS(run(pp, 1.0, std::vector<std::size_t>{0, 0}), DomainError);
    CHECK_THROWS_AS(run(pp, -1.0, order), DomainError);
}

TEST_CASE("random profiles: identity, order invariance, utilities, monotone sales") {
    for (std::uint64_t trial = 0; trial < 300; ++trial) {
        Engine rng = make_engine(3, Stream::Instances, trial);
        const std::size_t n = 1 + rng() % 6;
        std::vector<ConcaveValuation> vs;
        for (std::size_t i = 0; i < n; ++i) {
            switch (rng() % 3) {
                case 0: vs.push_back(ConcaveValuation::linear(2 * uniform01(rng))); break;
                case 1: vs.push_back(ConcaveValuation::power(0.2 + uniform01(rng), 0.2 + 0.8 * uniform01(rng))); break;
                default: vs.push_back(ConcaveValuation::log_cap(1.5 + 5 * uniform01(rng)).scaled(0.5 + uniform01(rng)));
            }
        }
        const ValuationProfile prof(vs);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        double previous_sold = 2.0;
        for (double p : {0.0, 0.05, 0.2, 0.4, 0.7, 1.0, 1.5, 3.0}) {
            const auto base = run(prof, p, perm);
            CHECK(base.identity_residual() <= 1e-12);
            CHECK(base.sold <= previous_sold + 1e-15);
            previous_sold = base.sold;
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(base.fractions[i] >= 0.0);
                CHECK(base.fractions[i] <= 1.0);
                CHECK(base.utilities[i] >= -1e-12);
                CHECK(base.payments[i] == Approx(p * base.fractions[i]));
                total += base.fractions[i];
            }
            CHECK(total <= 1.0 + 1e-12);
            CHECK(base.revenue == Approx(p * base.sold));
            std::vector<std::size_t> shuffled = perm;
            Engine r2 = make_engine(5, Stream::Instances, trial);
            for (int k = 0; k < 4; ++k) {
                std::shuffle(shuffled.begin(), shuffled.end(), r2);
                const auto other = run(prof, p, shuffled);
                CHECK(other.sold == Approx(base.sold).epsilon(1e-12));
                CHECK(other.revenue == Approx(base.revenue).epsilon(1e-12));
                CHECK(other.permutation == shuffled);
            }
        }
    }
}

TEST_CASE("expected outcome") {
    const std::vector<ValuationDistribution> pm{point(ConcaveValuation::linear(2)), point(ConcaveValuation::power(1, 0.5))};
    const auto e = expected_outcome(pm, 1.0, Ordering::fixed({1, 0}), 50, 1);
    CHECK(e.welfare.std_error == 0.0);
    CHECK(e.sold.mean == Approx(1.0));
    CHECK(e.welfare.mean == Approx(0.5 + 2 * 0.75));

    // two i.i.d. agents with slope uniform on {0.5, 2} at p = 1: E[sold] = 0.75
    const auto coin = ValuationDistribution::finite_support(
        {{ConcaveValuation::linear(0.5), 0.5}, {ConcaveValuation::linear(2.0), 0.5}});
    const std::vector<ValuationDistribution> iid{coin, coin};
    const double exact = oracle::expected_min({{{0.0, 0.5}, {1.0, 0.5}}, {{0.0, 0.5}, {1.0, 0.5}}});
    CHECK(exact == Approx(0.75));
    const auto mc = expected_outcome(iid, 1.0, Ordering::identity(2), 100000, 42);
    CHECK(std::abs(mc.sold.mean - exact) <= 3 * mc.sold.std_error);
    CHECK(std::abs(mc.revenue.mean - exact) <= 3 * mc.revenue.std_error);
    CHECK(mc.max_identity_residual <= 1e-12);
    CHECK(mc.min_utility >= -1e-12);

    const auto again = expected_outcome(iid, 1.0, Ordering::identity(2), 100000, 42);
    CHECK(again.welfare.mean == mc.welfare.mean);
    CHECK(again.welfare.std_error == mc.welfare.std_error);

    CHECK_THROWS_AS(expected_outcome(iid, 1.0, Ordering::identity(3), 10, 1), DomainError);
    CHECK_THROWS_AS(expected_outcome(iid, 1.0, Ordering::identity(2), 0, 1), DomainError);
}

TEST_CASE("orderings") {
    CHECK(Ordering::reverse(3).permutation() == std::vector<std::size_t>{2, 1, 0});
    CHECK(Ordering::identity(3).permutation() == std::vector<std::size_t>{0, 1, 2});
    CHECK_THROWS_AS(Ordering::fixed({0, 2}).validate(2), DomainError);
    CHECK_NOTHROW(Ordering::uniform_random().validate(5));
    CHECK(is_permutation_of(std::vector<std::size_t>{2, 0, 1}, 3));
    CHECK_FALSE(is_permutation_of(std::vector<std::size_t>{2, 0, 0}, 3));
}
