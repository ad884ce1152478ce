#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>

namespace divprice {

/// Monte Carlo mean with its standard error and provenance.
struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;

    double lower(double sigmas) const { return mean - sigmas * std_error; }
    double upper(double sigmas) const { return mean + sigmas * std_error; }
};

/// Exact value reported in Estimate form (zero standard error).
inline Estimate exact_estimate(double value, std::size_t samples = 1, std::uint64_t seed = 0) {
    return Estimate{value, 0.0, samples, seed};
}

/// Sample mean and standard error (unbiased variance / n). Summation runs in
/// index order, so the result only depends on the values and their order.
inline Estimate mean_estimate(std::span<const double> xs, std::uint64_t seed) {
    Estimate e;
    e.samples = xs.size();
    e.seed = seed;
    if (xs.empty()) return e;
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double n = static_cast<double>(xs.size());
    e.mean = sum / n;
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - e.mean) * (x - e.mean);
        e.std_error = std::sqrt(ss / (n - 1.0) / n);
    }
    return e;
}

/// Ratio mean(num) / mean(den) over paired samples with the delta-method
/// standard error.
inline Estimate ratio_estimate(std::span<const double> num, std::span<const double> den,
                               std::uint64_t seed) {
    const Estimate a = mean_estimate(num, seed);
    const Estimate b = mean_estimate(den, seed);
    Estimate r;
    r.samples = num.size();
    r.seed = seed;
    if (b.mean == 0.0) return r;
    r.mean = a.mean / b.mean;
    if (num.size() > 1) {
        double ss = 0.0;
        for (std::size_t i = 0; i < num.size(); ++i) {
            const double psi = (num[i] - r.mean * den[i]) / b.mean;
            ss += psi * psi;
        }
        const double n = static_cast<double>(num.size());
        r.std_error = std::sqrt(ss / (n - 1.0) / n);
    }
    return r;
}

}  // namespace divprice
