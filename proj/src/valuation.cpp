#include "divprice/valuation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "divprice/errors.hpp"

namespace divprice {

namespace {

constexpr double kProbTolerance = 1e-12;
constexpr double kSlopeTolerance = 1e-12;

void check_fraction(double z, const char* what) {
    if (!(z >= 0.0 && z <= 1.0)) {
        std::ostringstream os;
        os << what << ": fraction " << z << " outside [0,1]";
        throw DomainError(os.str());
    }
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(12);
    os << x;
    return os.str();
}

std::vector<double> cumulative(std::span<const double> probs, const char* what) {
    std::vector<double> cum;
    cum.reserve(probs.size());
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw DomainError(std::string(what) + ": probabilities must be nonnegative");
        }
        total += p;
        cum.push_back(total);
    }
    if (probs.empty() || std::abs(total - 1.0) > kProbTolerance) {
        throw DomainError(std::string(what) + ": probabilities must sum to 1 (got " + fmt(total) + ")");
    }
    cum.back() = 1.0;
    return cum;
}

std::size_t pick(const std::vector<double>& cum, double u) {
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    const auto idx = static_cast<std::size_t>(it - cum.begin());
    return std::min(idx, cum.size() - 1);
}

}  // namespace

// ---------------------------------------------------------------- Power

double Power::value(double z) const { return a * std::pow(z, c); }

double Power::deriv(double z) const {
    if (c == 1.0) return a;
    if (z == 0.0) return kInfinity;
    return a * c * std::pow(z, c - 1.0);
}

double Power::inv_deriv(double p) const {
    if (p <= 0.0) return 1.0;
    if (c == 1.0) return a >= p ? 1.0 : 0.0;
    // a c z^(c-1) >= p  <=>  z <= (a c / p)^(1/(1-c))
    const double z = std::pow(a * c / p, 1.0 / (1.0 - c));
    return std::min(1.0, z);
}

// ---------------------------------------------------------------- LogCap

double solve_log_cap_rho(double kappa) {
    if (!(kappa > 1.0) || !std::isfinite(kappa)) {
        throw DomainError("log_cap: kappa must be finite and > 1 (got " + fmt(kappa) + ")");
    }
    const double target = 1.0 + std::log(kappa);
    double lo = 1.0;
    double hi = 10.0 + 2.0 * target;
    // rho - ln rho is increasing on rho > 1
    while (hi - lo > 1e-15 * hi) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (mid - std::log(mid) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double LogCap::value(double z) const {
    if (z <= knee) return kappa * z;
    return 1.0 + std::log(z) / rho;
}

double LogCap::deriv(double z) const {
    if (z < knee) return kappa;
    return 1.0 / (rho * z);
}

double LogCap::inv_deriv(double p) const {
    if (p > kappa) return 0.0;
    if (p <= 1.0 / rho) return 1.0;
    if (p == kappa) return knee;
    return std::min(1.0, 1.0 / (p * rho));
}

// ---------------------------------------------------------------- PiecewiseLinear

std::size_t PiecewiseLinear::segment(double z) const {
    const auto& zs = data_->z;
    const auto it = std::upper_bound(zs.begin(), zs.end(), z);
    const auto k = static_cast<std::size_t>(it - zs.begin());
    // k >= 1 because zs[0] = 0 <= z
    return std::min(k - 1, data_->slope.size() - 1);
}

double PiecewiseLinear::value(double z) const {
    const std::size_t k = segment(z);
    return data_->v[k] + data_->slope[k] * (z - data_->z[k]);
}

double PiecewiseLinear::deriv(double z) const { return data_->slope[segment(z)]; }

double PiecewiseLinear::inv_deriv(double p) const {
    const auto& s = data_->slope;
    // slopes are nonincreasing: find the last segment with slope >= p
    std::size_t count = 0;
    while (count < s.size() && s[count] >= p) ++count;
    if (count == 0) return 0.0;
    return data_->z[count];
}

// ---------------------------------------------------------------- ConcaveValuation

ConcaveValuation ConcaveValuation::linear(double a) {
    if (!(a >= 0.0) || !std::isfinite(a)) {
        throw DomainError("linear: slope must be finite and >= 0 (got " + fmt(a) + ")");
    }
    return ConcaveValuation(Linear{a});
}

ConcaveValuation ConcaveValuation::power(double a, double c) {
    if (!(a > 0.0) || !std::isfinite(a)) {
        throw DomainError("power: scale a must be finite and > 0 (got " + fmt(a) + ")");
    }
    if (!(c > 0.0 && c <= 1.0)) {
        throw DomainError("power: exponent c must lie in (0,1] (got " + fmt(c) + ")");
    }
    return ConcaveValuation(Power{a, c});
}

ConcaveValuation ConcaveValuation::log_cap(double kappa) {
    const double rho = solve_log_cap_rho(kappa);
    return ConcaveValuation(LogCap{kappa, rho, 1.0 / (kappa * rho)});
}

ConcaveValuation ConcaveValuation::piecewise_linear(std::span<const std::pair<double, double>> points) {
    if (points.size() < 2) {
        throw DomainError("piecewise_linear: need at least two breakpoints");
    }
    auto data = std::make_shared<PiecewiseLinear::Data>();
    for (const auto& [z, v] : points) {
        if (!std::isfinite(z) || !std::isfinite(v)) {
            throw DomainError("piecewise_linear: breakpoints must be finite");
        }
        data->z.push_back(z);
        data->v.push_back(v);
    }
    if (data->z.front() != 0.0 || data->v.front() != 0.0) {
        throw DomainError("piecewise_linear: first breakpoint must be (0, 0)");
    }
    if (data->z.back() != 1.0) {
        throw DomainError("piecewise_linear: last breakpoint must have z = 1");
    }
    for (std::size_t k = 0; k + 1 < data->z.size(); ++k) {
        const double dz = data->z[k + 1] - data->z[k];
        if (!(dz > 0.0)) {
            throw DomainError("piecewise_linear: breakpoints must be strictly increasing in z");
        }
        const double s = (data->v[k + 1] - data->v[k]) / dz;
        if (s < -kSlopeTolerance) {
            throw DomainError("piecewise_linear: valuation must be nondecreasing (segment " +
                              std::to_string(k) + ")");
        }
        if (!data->slope.empty() && s > data->slope.back() + kSlopeTolerance) {
            throw DomainError("piecewise_linear: valuation must be concave (segment " +
                              std::to_string(k) + ")");
        }
        data->slope.push_back(std::max(0.0, data->slope.empty() ? s : std::min(s, data->slope.back())));
    }
    return ConcaveValuation(PiecewiseLinear(std::move(data)));
}

ConcaveValuation ConcaveValuation::scaled(double t) const {
    if (!(t > 0.0) || !std::isfinite(t)) {
        throw DomainError("scaled: multiplier must be finite and > 0 (got " + fmt(t) + ")");
    }
    ConcaveValuation out = *this;
    out.scale_ = scale_ * t;
    return out;
}

double ConcaveValuation::value(double z) const {
    check_fraction(z, "value");
    return scale_ * std::visit([z](const auto& r) { return r.value(z); }, rep_);
}

double ConcaveValuation::deriv(double z) const {
    check_fraction(z, "deriv");
    return scale_ * std::visit([z](const auto& r) { return r.deriv(z); }, rep_);
}

double ConcaveValuation::inv_deriv(double p) const {
    if (!(p >= 0.0)) {
        throw DomainError("inv_deriv: price must be >= 0 (got " + fmt(p) + ")");
    }
    const double q = p / scale_;
    return std::visit([q](const auto& r) { return r.inv_deriv(q); }, rep_);
}

double ConcaveValuation::curvature() const {
    const double top = value(1.0);
    if (!(top > 0.0)) {
        throw DegenerateValuation("curvature undefined: v(1) = 0");
    }
    return deriv(0.0) / top;
}

bool ConcaveValuation::has_kinks() const {
    if (const auto* pl = std::get_if<PiecewiseLinear>(&rep_)) return pl->data().slope.size() > 1;
    return std::holds_alternative<LogCap>(rep_);
}

std::vector<double> ConcaveValuation::critical_prices() const {
    std::vector<double> out;
    if (const auto* pl = std::get_if<PiecewiseLinear>(&rep_)) {
        for (double s : pl->data().slope) out.push_back(scale_ * s);
    } else {
        const double d0 = deriv(0.0);
        if (std::isfinite(d0)) out.push_back(d0);
        out.push_back(deriv(1.0));
    }
    out.erase(std::remove_if(out.begin(), out.end(), [](double p) { return !(p > 0.0); }), out.end());
    return out;
}

std::string ConcaveValuation::describe() const {
    std::ostringstream os;
    if (scale_ != 1.0) os << fmt(scale_) << "*";
    std::visit(
        [&os](const auto& r) {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, Linear>) {
                os << "linear(a=" << fmt(r.a) << ")";
            } else if constexpr (std::is_same_v<T, Power>) {
                os << "power(a=" << fmt(r.a) << ",c=" << fmt(r.c) << ")";
            } else if constexpr (std::is_same_v<T, LogCap>) {
                os << "log_cap(kappa=" << fmt(r.kappa) << ",rho=" << fmt(r.rho) << ")";
            } else {
                os << "piecewise_linear(";
                const auto& d = r.data();
                for (std::size_t k = 0; k < d.z.size(); ++k) {
                    if (k) os << ";";
                    os << fmt(d.z[k]) << ":" << fmt(d.v[k]);
                }
                os << ")";
            }
        },
        rep_);
    return os.str();
}

// ---------------------------------------------------------------- ValuationDistribution

struct ValuationDistribution::Impl {
    struct Finite {
        std::vector<Atom> atoms;
        std::vector<double> cum;
    };
    struct Scaled {
        ConcaveValuation base;
        std::vector<ScalarAtom> scalars;  // empty when uniform
        std::vector<double> cum;
        UniformScalar uniform;
    };
    std::variant<Finite, Scaled> body;
};

ValuationDistribution ValuationDistribution::point_mass(ConcaveValuation v) {
    return finite_support({Atom{std::move(v), 1.0}});
}

ValuationDistribution ValuationDistribution::finite_support(std::vector<Atom> atoms) {
    std::vector<double> probs;
    for (const auto& a : atoms) probs.push_back(a.prob);
    auto cum = cumulative(probs, "finite_support");
    Impl::Finite f{std::move(atoms), std::move(cum)};
    return ValuationDistribution(std::make_shared<const Impl>(Impl{std::move(f)}));
}

ValuationDistribution ValuationDistribution::scaled(ConcaveValuation base, std::vector<ScalarAtom> scalars) {
    std::vector<double> probs;
    for (const auto& s : scalars) {
        if (!(s.t > 0.0) || !std::isfinite(s.t)) {
            throw DomainError("scaled: multipliers must be finite and > 0");
        }
        probs.push_back(s.prob);
    }
    auto cum = cumulative(probs, "scaled");
    Impl::Scaled s{std::move(base), std::move(scalars), std::move(cum), {}};
    return ValuationDistribution(std::make_shared<const Impl>(Impl{std::move(s)}));
}

ValuationDistribution ValuationDistribution::scaled_uniform(ConcaveValuation base, double lo, double hi) {
    if (!(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi)) {
        throw DomainError("scaled_uniform: need 0 < lo <= hi < inf");
    }
    Impl::Scaled s{std::move(base), {}, {}, UniformScalar{lo, hi}};
    return ValuationDistribution(std::make_shared<const Impl>(Impl{std::move(s)}));
}

ConcaveValuation ValuationDistribution::sample(Engine& rng) const {
    const double u = uniform01(rng);
    if (const auto* f = std::get_if<Impl::Finite>(&impl_->body)) {
        return f->atoms[pick(f->cum, u)].valuation;
    }
    const auto& s = std::get<Impl::Scaled>(impl_->body);
    if (s.scalars.empty()) {
        return s.base.scaled(s.uniform.lo + u * (s.uniform.hi - s.uniform.lo));
    }
    return s.base.scaled(s.scalars[pick(s.cum, u)].t);
}

bool ValuationDistribution::is_discrete() const {
    if (std::holds_alternative<Impl::Finite>(impl_->body)) return true;
    return !std::get<Impl::Scaled>(impl_->body).scalars.empty();
}

std::vector<Atom> ValuationDistribution::atoms() const {
    if (const auto* f = std::get_if<Impl::Finite>(&impl_->body)) return f->atoms;
    const auto& s = std::get<Impl::Scaled>(impl_->body);
    if (s.scalars.empty()) {
        throw UnsupportedValuation("distribution has a continuous scalar part; atoms unavailable");
    }
    std::vector<Atom> out;
    out.reserve(s.scalars.size());
    for (const auto& sc : s.scalars) out.push_back(Atom{s.base.scaled(sc.t), sc.prob});
    return out;
}

std::size_t ValuationDistribution::support_size() const {
    if (const auto* f = std::get_if<Impl::Finite>(&impl_->body)) return f->atoms.size();
    const auto& s = std::get<Impl::Scaled>(impl_->body);
    return s.scalars.empty() ? 0 : s.scalars.size();
}

double ValuationDistribution::max_slope_at_zero() const {
    if (!is_discrete()) {
        const auto& s = std::get<Impl::Scaled>(impl_->body);
        return s.base.scaled(s.uniform.hi).deriv(0.0);
    }
    double best = 0.0;
    for (const auto& a : atoms()) best = std::max(best, a.valuation.deriv(0.0));
    return best;
}

double ValuationDistribution::max_curvature() const {
    if (!is_discrete()) {
        return std::get<Impl::Scaled>(impl_->body).base.curvature();
    }
    double best = 1.0;
    for (const auto& a : atoms()) {
        if (a.prob > 0.0) best = std::max(best, a.valuation.curvature());
    }
    return best;
}

std::vector<double> ValuationDistribution::critical_prices() const {
    std::vector<double> out;
    if (!is_discrete()) {
        const auto& s = std::get<Impl::Scaled>(impl_->body);
        for (double t : {s.uniform.lo, s.uniform.hi}) {
            for (double p : s.base.scaled(t).critical_prices()) out.push_back(p);
        }
        return out;
    }
    for (const auto& a : atoms()) {
        for (double p : a.valuation.critical_prices()) out.push_back(p);
    }
    return out;
}

std::string ValuationDistribution::describe() const {
    std::ostringstream os;
    if (const auto* f = std::get_if<Impl::Finite>(&impl_->body)) {
        if (f->atoms.size() == 1) return f->atoms.front().valuation.describe();
        os << "finite_support{";
        for (std::size_t k = 0; k < f->atoms.size(); ++k) {
            if (k) os << ", ";
            os << f->atoms[k].valuation.describe() << " w.p. " << fmt(f->atoms[k].prob);
        }
        os << "}";
        return os.str();
    }
    const auto& s = std::get<Impl::Scaled>(impl_->body);
    os << "t*" << s.base.describe() << " with t ~ ";
    if (s.scalars.empty()) {
        os << "uniform[" << fmt(s.uniform.lo) << "," << fmt(s.uniform.hi) << "]";
    } else {
        os << "{";
        for (std::size_t k = 0; k < s.scalars.size(); ++k) {
            if (k) os << ", ";
            os << fmt(s.scalars[k].t) << " w.p. " << fmt(s.scalars[k].prob);
        }
        os << "}";
    }
    return os.str();
}

// ---------------------------------------------------------------- profiles

ValuationProfile::ValuationProfile(std::vector<ConcaveValuation> valuations)
    : valuations_(std::move(valuations)) {
    if (valuations_.empty()) throw DomainError("valuation profile must contain at least one agent");
}

ValuationProfile sample_profile(std::span<const ValuationDistribution> dists, Engine& rng) {
    std::vector<ConcaveValuation> out;
    out.reserve(dists.size());
    for (const auto& d : dists) out.push_back(d.sample(rng));
    return ValuationProfile(std::move(out));
}

ValuationProfile sample_profile(std::span<const ValuationDistribution> dists, std::uint64_t seed) {
    Engine rng = make_engine(seed, Stream::Samples, 0);
    return sample_profile(dists, rng);
}

}  // namespace divprice
