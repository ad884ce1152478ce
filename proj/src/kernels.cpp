#include "divprice/kernels.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <numeric>

#include "divprice/errors.hpp"
#include "divprice/mechanism.hpp"
#include "divprice/welfare.hpp"

#ifdef DIVPRICE_HAVE_OPENMP
#include <omp.h>
#endif

namespace divprice::kernels {

namespace {

// Runs fn(i) for i in [0, n). Exceptions thrown inside the parallel region
// are captured and the first one is rethrown afterwards.
template <class Fn>
void for_each_sample(std::size_t n, Exec exec, Fn&& fn) {
    if (exec == Exec::Serial) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
#ifdef DIVPRICE_HAVE_OPENMP
    std::exception_ptr error;
    std::mutex error_mutex;
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
#else
    for (std::size_t i = 0; i < n; ++i) fn(i);
#endif
}

}  // namespace

int max_threads() {
#ifdef DIVPRICE_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

SampleBatch draw_samples(std::span<const ValuationDistribution> dists, const Ordering& ordering,
                         std::size_t count, std::uint64_t seed, Exec exec) {
    if (dists.empty()) throw DomainError("draw_samples: need at least one agent");
    ordering.validate(dists.size());

    SampleBatch batch;
    batch.seed = seed;
    batch.random_order = ordering.is_random();
    batch.profiles.resize(count);
    if (batch.random_order) {
        batch.orders.resize(count);
    } else {
        batch.orders.push_back(ordering.permutation());
    }

    const std::size_t n = dists.size();
    for_each_sample(count, exec, [&](std::size_t i) {
        Engine rng = make_engine(seed, Stream::Samples, i);
        batch.profiles[i] = sample_profile(dists, rng);
        if (batch.random_order) {
            std::vector<std::size_t> perm(n);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            std::shuffle(perm.begin(), perm.end(), rng);
            batch.orders[i] = std::move(perm);
        }
    });
    return batch;
}

std::vector<double> sold_fractions(const SampleBatch& batch, double price, Exec exec) {
    std::vector<double> out(batch.size());
    for_each_sample(batch.size(), exec, [&](std::size_t i) {
        double demand = 0.0;
        for (const auto& v : batch.profiles[i].valuations()) demand += v.inv_deriv(price);
        out[i] = std::min(1.0, demand);
    });
    return out;
}

std::vector<MechanismOutcome> simulate(const SampleBatch& batch, double price, Exec exec) {
    std::vector<MechanismOutcome> out(batch.size());
    for_each_sample(batch.size(), exec,
                    [&](std::size_t i) { out[i] = run(batch.profiles[i], price, batch.order(i)); });
    return out;
}

std::vector<OptimalAllocation> optimal_allocations(const SampleBatch& batch, Exec exec) {
    std::vector<OptimalAllocation> out(batch.size());
    for_each_sample(batch.size(), exec,
                    [&](std::size_t i) { out[i] = optimal_allocation(batch.profiles[i]); });
    return out;
}

}  // namespace divprice::kernels
