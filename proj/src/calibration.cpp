#include "divprice/calibration.hpp"

#include <cmath>
#include <limits>

#include "divprice/errors.hpp"

namespace divprice {

namespace {

constexpr double kBracketWidth = 1e-9;
constexpr int kMaxIterations = 200;

}  // namespace

Estimate sold_fraction(const SampleBatch& batch, double price, Exec exec) {
    if (!(price >= 0.0)) throw DomainError("sold_fraction: price must be >= 0");
    const auto per_sample = kernels::sold_fractions(batch, price, exec);
    return mean_estimate(per_sample, batch.seed);
}

Estimate sold_fraction(std::span<const ValuationDistribution> dists, double price, const Ordering& ordering,
                       std::size_t samples, std::uint64_t seed, Exec exec) {
    if (samples == 0) throw DomainError("sold_fraction: samples must be >= 1");
    const SampleBatch batch = kernels::draw_samples(dists, ordering, samples, seed, exec);
    return sold_fraction(batch, price, exec);
}

double calibration_price_max(std::span<const ValuationDistribution> dists, double price_cap) {
    double top = 0.0;
    for (const auto& d : dists) top = std::max(top, d.max_slope_at_zero());
    if (!std::isfinite(top)) return price_cap;
    // strictly above every v'(0), so nobody buys
    return std::nextafter(top, std::numeric_limits<double>::infinity());
}

PriceCalibration calibrate(const SampleBatch& batch, double target, double price_max,
                           const CalibrationOptions& options) {
    if (!(target > 0.0 && target < 1.0)) throw DomainError("calibrate: target must lie in (0,1)");
    if (!(options.tolerance > 0.0)) throw DomainError("calibrate: tolerance must be > 0");
    if (!(price_max > 0.0)) throw DomainError("calibrate: price bracket must be positive");

    auto curve = [&](double p) { return sold_fraction(batch, p, options.exec); };

    PriceCalibration cal;
    cal.target = target;
    cal.samples = batch.size();
    cal.seed = batch.seed;
    cal.price_max = price_max;

    double lo = 0.0;
    double hi = price_max;
    const Estimate at_lo = curve(lo);
    const Estimate at_hi = curve(hi);
    cal.sold_at_max = at_hi.mean;

    auto finish = [&](double price, const Estimate& achieved) {
        cal.price = price;
        cal.achieved = achieved;
        cal.residual = std::abs(achieved.mean - target);
        cal.bracket_lo = lo;
        cal.bracket_hi = hi;
        return cal;
    };

    if (at_lo.mean < target) {
        cal.target_unreachable = true;
        return finish(0.0, at_lo);
    }
    if (at_hi.mean >= target) {
        cal.cap_limited = true;
        return finish(hi, at_hi);
    }

    Estimate best = at_lo;
    for (int it = 0; it < kMaxIterations && hi - lo >= kBracketWidth; ++it) {
        ++cal.iterations;
        const double mid = 0.5 * (lo + hi);
        const Estimate fm = curve(mid);
        if (std::abs(fm.mean - target) <= options.tolerance) {
            return finish(mid, fm);
        }
        if (fm.mean >= target) {
            lo = mid;
            best = fm;
        } else {
            hi = mid;
        }
    }
    // The curve jumps over the target inside a bracket narrower than the
    // resolution: stay on the side that sells at least the target.
    cal.target_unreachable = std::abs(best.mean - target) > options.tolerance;
    return finish(lo, best);
}

PriceCalibration calibrate(std::span<const ValuationDistribution> dists, double target, const Ordering& ordering,
                           std::size_t samples, std::uint64_t seed, const CalibrationOptions& options) {
    if (samples == 0) throw DomainError("calibrate: samples must be >= 1");
    const SampleBatch batch = kernels::draw_samples(dists, ordering, samples, seed, options.exec);
    return calibrate(batch, target, calibration_price_max(dists, options.price_cap), options);
}

std::vector<CurvePoint> sold_fraction_curve(const SampleBatch& batch, std::span<const double> prices, Exec exec) {
    std::vector<CurvePoint> out;
    out.reserve(prices.size());
    for (double p : prices) {
        const Estimate e = sold_fraction(batch, p, exec);
        out.push_back(CurvePoint{p, e.mean, e.std_error});
    }
    return out;
}

}  // namespace divprice
