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

/// E[min{1, sum_j y*_j(v_j, p)}]; equals the expected sold fraction under
/// any ordering.
Estimate sold_fraction(std::span<const ValuationDistribution> dists, double price, const Ordering& ordering,
                       std::size_t samples, std::uint64_t seed, Exec exec = Exec::Parallel);

Estimate sold_fraction(const SampleBatch& batch, double price, Exec exec = Exec::Parallel);

struct CalibrationOptions {
    double tolerance = 1e-3;
    /// Upper end of the price bracket when some marginal value at zero is
    /// unbounded.
    double price_cap = 1e3;
    Exec exec = Exec::Parallel;
};

struct PriceCalibration {
    double price = 0.0;
    Estimate achieved;          // sold fraction at `price`
    double target = 0.0;
    double residual = 0.0;      // |achieved - target|
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    double price_max = 0.0;     // initial upper end of the bracket
    double sold_at_max = 0.0;   // sold fraction at price_max
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    int iterations = 0;
    /// The sold-fraction curve steps over the target; `price` is the largest
    /// price found that still sells at least the target.
    bool target_unreachable = false;
    /// Even price_max sells more than the target (bounded by the cap).
    bool cap_limited = false;

    bool attained(double tolerance) const { return !target_unreachable && !cap_limited && residual <= tolerance; }
};

/// Bisection on the price with common random numbers, so the empirical
/// sold-fraction curve is nonincreasing in the price sample by sample.
PriceCalibration calibrate(std::span<const ValuationDistribution> dists, double target, const Ordering& ordering,
                           std::size_t samples, std::uint64_t seed, const CalibrationOptions& options = {});

/// Calibration over an already drawn batch. `price_max` bounds the bracket.
PriceCalibration calibrate(const SampleBatch& batch, double target, double price_max,
                           const CalibrationOptions& options = {});

/// Upper end of the calibration bracket: max v'(0) over the supports, or the
/// cap when that is unbounded.
double calibration_price_max(std::span<const ValuationDistribution> dists, double price_cap);

struct CurvePoint {
    double x = 0.0;
    double y = 0.0;
    double std_error = 0.0;
};

/// Sold fraction at each price over one batch.
std::vector<CurvePoint> sold_fraction_curve(const SampleBatch& batch, std::span<const double> prices,
                                            Exec exec = Exec::Parallel);

}  // namespace divprice
