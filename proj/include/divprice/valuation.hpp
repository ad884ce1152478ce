#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "divprice/rng.hpp"

namespace divprice {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// v(z) = a z, a >= 0.
struct Linear {
    double a = 0.0;

    double value(double z) const { return a * z; }
    double deriv(double) const { return a; }
    double inv_deriv(double p) const { return a >= p ? 1.0 : 0.0; }
};

/// v(z) = a z^c with a > 0 and c in (0, 1]. For c < 1 the marginal value at
/// zero is unbounded.
struct Power {
    double a = 1.0;
    double c = 1.0;

    double value(double z) const;
    double deriv(double z) const;
    double inv_deriv(double p) const;
};

/// Linear with slope kappa up to the knee 1/(kappa rho), then 1 + ln(z)/rho.
/// rho solves rho - ln(rho) = 1 + ln(kappa), which makes both pieces agree
/// in value and slope at the knee. Curvature is exactly kappa and v(1) = 1.
struct LogCap {
    double kappa = 2.0;
    double rho = 1.0;
    double knee = 0.5;

    double value(double z) const;
    double deriv(double z) const;
    double inv_deriv(double p) const;
};

/// Solves rho - ln(rho) = 1 + ln(kappa) for rho > 1 by bisection.
double solve_log_cap_rho(double kappa);

/// Concave interpolant through breakpoints (z_k, v_k), z_0 = 0, v_0 = 0,
/// last z = 1, with nonincreasing nonnegative slopes.
class PiecewiseLinear {
public:
    struct Data {
        std::vector<double> z;
        std::vector<double> v;
        std::vector<double> slope;  // slope[k] on [z[k], z[k+1])
    };

    explicit PiecewiseLinear(std::shared_ptr<const Data> data) : data_(std::move(data)) {}

    double value(double z) const;
    /// Right-derivative; left-derivative at z = 1.
    double deriv(double z) const;
    /// Largest utility-maximising fraction: the end of the last segment whose
    /// slope is at least p.
    double inv_deriv(double p) const;

    const Data& data() const { return *data_; }

private:
    std::size_t segment(double z) const;
    std::shared_ptr<const Data> data_;
};

/// A monotone nondecreasing concave valuation on [0, 1] with v(0) = 0,
/// optionally multiplied by a positive scalar t (v(z) = t h(z)).
/// Immutable; copies share breakpoint storage.
class ConcaveValuation {
public:
    using Representation = std::variant<PiecewiseLinear, Power, Linear, LogCap>;

    static ConcaveValuation linear(double a);
    static ConcaveValuation power(double a, double c);
    static ConcaveValuation log_cap(double kappa);
    static ConcaveValuation piecewise_linear(std::span<const std::pair<double, double>> points);

    /// t * this; t must be positive and finite.
    ConcaveValuation scaled(double t) const;

    /// v(z); throws DomainError unless 0 <= z <= 1.
    double value(double z) const;
    /// v'(z) (right-derivative at kinks); +inf at z = 0 for Power with c < 1.
    double deriv(double z) const;
    /// Largest z in [0,1] with v'(z) >= p: the single-agent best response.
    double inv_deriv(double p) const;
    /// v'(0) / v(1) >= 1; +inf when v'(0) is unbounded. Throws
    /// DegenerateValuation when v(1) = 0.
    double curvature() const;

    double scale() const { return scale_; }
    const Representation& representation() const { return rep_; }
    bool has_kinks() const;
    /// Slopes at which demand jumps (linear pieces), scaled. Used to seed
    /// price searches with the exact breakpoints of the revenue curve.
    std::vector<double> critical_prices() const;
    std::string describe() const;

private:
    explicit ConcaveValuation(Representation rep) : rep_(std::move(rep)) {}

    Representation rep_;
    double scale_ = 1.0;
};

struct Atom {
    ConcaveValuation valuation;
    double prob = 0.0;
};

struct ScalarAtom {
    double t = 1.0;
    double prob = 0.0;
};

struct UniformScalar {
    double lo = 1.0;
    double hi = 1.0;
};

/// Independent distribution over valuations for one agent: either a finite
/// support, or a base function h with a random multiplier t (discrete or
/// uniform on [lo, hi]).
class ValuationDistribution {
public:
    static ValuationDistribution point_mass(ConcaveValuation v);
    static ValuationDistribution finite_support(std::vector<Atom> atoms);
    static ValuationDistribution scaled(ConcaveValuation base, std::vector<ScalarAtom> scalars);
    static ValuationDistribution scaled_uniform(ConcaveValuation base, double lo, double hi);

    ConcaveValuation sample(Engine& rng) const;

    /// True when the support is finite (finite support or discrete scalar).
    bool is_discrete() const;
    /// Support atoms with probabilities; throws UnsupportedValuation for a
    /// continuous scalar part.
    std::vector<Atom> atoms() const;
    std::size_t support_size() const;
    /// Supremum of v'(0) over the support (may be +inf).
    double max_slope_at_zero() const;
    /// Maximum curvature over the support (may be +inf).
    double max_curvature() const;
    /// Union of critical prices over the support (discrete case) or of the
    /// extreme scalings (uniform case).
    std::vector<double> critical_prices() const;
    std::string describe() const;

private:
    struct Impl;
    explicit ValuationDistribution(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<const Impl> impl_;
};

/// One drawn valuation per agent.
class ValuationProfile {
public:
    ValuationProfile() = default;
    explicit ValuationProfile(std::vector<ConcaveValuation> valuations);

    std::size_t size() const { return valuations_.size(); }
    const ConcaveValuation& operator[](std::size_t i) const { return valuations_[i]; }
    std::span<const ConcaveValuation> valuations() const { return valuations_; }

private:
    std::vector<ConcaveValuation> valuations_;
};

/// Independent draw per agent, deterministic in `seed`.
ValuationProfile sample_profile(std::span<const ValuationDistribution> dists, std::uint64_t seed);
/// Draws one valuation per agent from `rng`, in agent order.
ValuationProfile sample_profile(std::span<const ValuationDistribution> dists, Engine& rng);

}  // namespace divprice
