#include "divprice/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <numeric>
#include <random>
#include <sstream>

#include "divprice/errors.hpp"
#include "divprice/mechanism.hpp"
#include "divprice/welfare.hpp"

namespace divprice {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------- config parsing helpers

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
}

void check_keys(const json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
    require_object(j, path);
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(join(path, key), "unknown field");
    }
}

const json& field(const json& j, const std::string& path, const std::string& key) {
    if (!j.contains(key)) fail(join(path, key), "missing required field");
    return j.at(key);
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    const double x = j.get<double>();
    if (!std::isfinite(x)) fail(path, "expected a finite number");
    return x;
}

std::uint64_t as_u64(const json& j, const std::string& path) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer()) {
        // documents built in code store positive literals as signed
        const std::int64_t x = j.get<std::int64_t>();
        if (x < 0) fail(path, "must be a nonnegative integer");
        return static_cast<std::uint64_t>(x);
    }
    if (j.is_number_float()) {
        const double x = j.get<double>();
        if (x >= 0.0 && x < 1.8446744073709552e19 && std::floor(x) == x) return static_cast<std::uint64_t>(x);
        fail(path, "must be a nonnegative integer");
    }
    fail(path, "expected an integer");
}

std::size_t as_count(const json& j, const std::string& path) {
    const std::uint64_t n = as_u64(j, path);
    if (n == 0) fail(path, "must be a positive integer");
    return static_cast<std::size_t>(n);
}

std::string as_string(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

bool as_bool(const json& j, const std::string& path) {
    if (!j.is_boolean()) fail(path, "expected true or false");
    return j.get<bool>();
}

// Module constructors validate their own arguments; attach the field path.
template <class F>
auto build(const std::string& path, F&& make) {
    try {
        return make();
    } catch (const DomainError& e) {
        fail(path, e.what());
    } catch (const UnsupportedValuation& e) {
        fail(path, e.what());
    }
}

ConcaveValuation parse_valuation(const json& j, const std::string& path) {
    require_object(j, path);
    const std::string kind = as_string(field(j, path, "kind"), join(path, "kind"));
    if (kind == "linear") {
        check_keys(j, path, {"kind", "a"});
        const double a = as_number(field(j, path, "a"), join(path, "a"));
        if (!(a >= 0.0)) fail(join(path, "a"), "slope must be >= 0");
        return build(path, [&] { return ConcaveValuation::linear(a); });
    }
    if (kind == "power") {
        check_keys(j, path, {"kind", "a", "c"});
        const double a = as_number(field(j, path, "a"), join(path, "a"));
        const double c = as_number(field(j, path, "c"), join(path, "c"));
        if (!(a > 0.0)) fail(join(path, "a"), "scale must be > 0");
        if (!(c > 0.0 && c <= 1.0)) fail(join(path, "c"), "exponent must lie in (0, 1]");
        return build(path, [&] { return ConcaveValuation::power(a, c); });
    }
    if (kind == "log_cap") {
        check_keys(j, path, {"kind", "kappa"});
        const double kappa = as_number(field(j, path, "kappa"), join(path, "kappa"));
        if (!(kappa > 1.0)) fail(join(path, "kappa"), "curvature must be > 1");
        return build(path, [&] { return ConcaveValuation::log_cap(kappa); });
    }
    if (kind == "piecewise_linear") {
        check_keys(j, path, {"kind", "points"});
        const std::string pp = join(path, "points");
        const json& pts = field(j, path, "points");
        if (!pts.is_array()) fail(pp, "expected an array of [z, v] pairs");
        std::vector<std::pair<double, double>> points;
        for (std::size_t k = 0; k < pts.size(); ++k) {
            const std::string at = index(pp, k);
            if (!pts[k].is_array() || pts[k].size() != 2) fail(at, "expected a [z, v] pair");
            points.emplace_back(as_number(pts[k][0], at), as_number(pts[k][1], at));
        }
        return build(path, [&] { return ConcaveValuation::piecewise_linear(points); });
    }
    fail(join(path, "kind"), "unknown valuation kind '" + kind + "'");
}

ValuationDistribution parse_distribution(const json& j, const std::string& path) {
    require_object(j, path);
    const std::string kind = as_string(field(j, path, "kind"), join(path, "kind"));
    if (kind == "point_mass") {
        check_keys(j, path, {"kind", "valuation"});
        return ValuationDistribution::point_mass(parse_valuation(field(j, path, "valuation"), join(path, "valuation")));
    }
    if (kind == "finite_support") {
        check_keys(j, path, {"kind", "atoms"});
        const std::string ap = join(path, "atoms");
        const json& arr = field(j, path, "atoms");
        if (!arr.is_array() || arr.empty()) fail(ap, "expected a nonempty array");
        std::vector<Atom> atoms;
        for (std::size_t k = 0; k < arr.size(); ++k) {
            const std::string at = index(ap, k);
            check_keys(arr[k], at, {"valuation", "prob"});
            atoms.push_back(Atom{parse_valuation(field(arr[k], at, "valuation"), join(at, "valuation")),
                                 as_number(field(arr[k], at, "prob"), join(at, "prob"))});
        }
        return build(path, [&] { return ValuationDistribution::finite_support(std::move(atoms)); });
    }
    if (kind == "scaled") {
        check_keys(j, path, {"kind", "base", "scalars", "uniform"});
        const ConcaveValuation base = parse_valuation(field(j, path, "base"), join(path, "base"));
        const bool discrete = j.contains("scalars");
        if (discrete == j.contains("uniform")) fail(path, "exactly one of 'scalars' and 'uniform' is required");
        if (discrete) {
            const std::string sp = join(path, "scalars");
            const json& arr = j.at("scalars");
            if (!arr.is_array() || arr.empty()) fail(sp, "expected a nonempty array");
            std::vector<ScalarAtom> scalars;
            for (std::size_t k = 0; k < arr.size(); ++k) {
                const std::string at = index(sp, k);
                check_keys(arr[k], at, {"t", "prob"});
                scalars.push_back(ScalarAtom{as_number(field(arr[k], at, "t"), join(at, "t")),
                                             as_number(field(arr[k], at, "prob"), join(at, "prob"))});
            }
            return build(path, [&] { return ValuationDistribution::scaled(base, std::move(scalars)); });
        }
        const std::string up = join(path, "uniform");
        const json& u = j.at("uniform");
        check_keys(u, up, {"lo", "hi"});
        const double lo = as_number(field(u, up, "lo"), join(up, "lo"));
        const double hi = as_number(field(u, up, "hi"), join(up, "hi"));
        return build(path, [&] { return ValuationDistribution::scaled_uniform(base, lo, hi); });
    }
    // a bare valuation record is shorthand for its point mass
    return ValuationDistribution::point_mass(parse_valuation(j, path));
}

std::vector<ValuationDistribution> parse_instance(const json& j, const std::string& path) {
    check_keys(j, path, {"agents", "n", "iid"});
    std::vector<ValuationDistribution> agents;
    if (j.contains("agents") == j.contains("iid")) fail(path, "exactly one of 'agents' and 'iid' is required");
    if (j.contains("agents")) {
        const std::string ap = join(path, "agents");
        const json& arr = j.at("agents");
        if (!arr.is_array() || arr.empty()) fail(ap, "expected a nonempty array");
        for (std::size_t i = 0; i < arr.size(); ++i) agents.push_back(parse_distribution(arr[i], index(ap, i)));
        if (j.contains("n") && as_count(j.at("n"), join(path, "n")) != agents.size()) {
            fail(join(path, "n"), "does not match the number of agents");
        }
    } else {
        if (!j.contains("n")) fail(join(path, "n"), "required with 'iid'");
        const std::size_t n = as_count(j.at("n"), join(path, "n"));
        const ValuationDistribution d = parse_distribution(j.at("iid"), join(path, "iid"));
        agents.assign(n, d);
    }
    return agents;
}

TargetSpec parse_target(const json& j, const std::string& path) {
    TargetSpec t;
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "rho1") {
            t.kind = TargetSpec::Kind::Rho1;
        } else if (s == "rho2") {
            t.kind = TargetSpec::Kind::Rho2;
        } else {
            fail(path, "expected 'rho1', 'rho2' or a number in (0,1)");
        }
        return t;
    }
    const double v = as_number(j, path);
    if (!(v > 0.0 && v < 1.0)) fail(path, "custom target must lie in (0,1)");
    t.kind = TargetSpec::Kind::Custom;
    t.custom = v;
    return t;
}

std::vector<OrderingSpec> parse_orderings(const json& j, const std::string& path, std::size_t n) {
    if (!j.is_array() || j.empty()) fail(path, "expected a nonempty array");
    std::vector<OrderingSpec> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        const std::string at = index(path, k);
        OrderingSpec spec;
        if (j[k].is_string()) {
            spec.kind = j[k].get<std::string>();
            if (spec.kind != "identity" && spec.kind != "reverse" && spec.kind != "random" &&
                spec.kind != "random_fixed") {
                fail(at, "expected identity, reverse, random, random_fixed or a permutation");
            }
        } else if (j[k].is_array()) {
            spec.kind = "fixed";
            for (std::size_t i = 0; i < j[k].size(); ++i) {
                spec.permutation.push_back(static_cast<std::size_t>(as_u64(j[k][i], index(at, i))));
            }
            if (n > 0 && !is_permutation_of(spec.permutation, n)) {
                fail(at, "not a permutation of the " + std::to_string(n) + " agents (0-based)");
            }
        } else {
            fail(at, "expected a string or an array");
        }
        out.push_back(std::move(spec));
    }
    return out;
}

std::vector<OrderingSpec> default_orderings(Task task, const TargetSpec& target) {
    auto named = [](std::initializer_list<const char*> kinds) {
        std::vector<OrderingSpec> v;
        for (const char* k : kinds) v.push_back(OrderingSpec{k, {}});
        return v;
    };
    switch (task) {
        case Task::WelfareRatio:
            if (target.kind == TargetSpec::Kind::Rho2) return named({"random"});
            return named({"identity", "reverse", "random_fixed", "random_fixed", "random_fixed"});
        case Task::VerifyLemmas:
            return named({"identity", "reverse"});
        default:
            return named({"identity"});
    }
}

// ---------------------------------------------------------------- running

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

struct ResolvedOrdering {
    std::string name;
    Ordering ordering;
};

std::vector<ResolvedOrdering> resolve_orderings(const ExperimentConfig& config) {
    const std::size_t n = config.agents.size();
    std::vector<ResolvedOrdering> out;
    std::size_t random_fixed = 0;
    std::size_t explicit_fixed = 0;
    for (const auto& spec : config.orderings) {
        if (spec.kind == "identity") {
            out.push_back({"identity", Ordering::identity(n)});
        } else if (spec.kind == "reverse") {
            out.push_back({"reverse", Ordering::reverse(n)});
        } else if (spec.kind == "random") {
            out.push_back({"random", Ordering::uniform_random()});
        } else if (spec.kind == "random_fixed") {
            std::vector<std::size_t> perm(n);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            Engine rng = make_engine(config.seed, Stream::FixedOrders, random_fixed);
            for (std::size_t i = n; i > 1; --i) {
                const auto j = static_cast<std::size_t>(rng() % i);
                std::swap(perm[i - 1], perm[j]);
            }
            ++random_fixed;
            out.push_back({"random_fixed_" + std::to_string(random_fixed), Ordering::fixed(std::move(perm))});
        } else {
            ++explicit_fixed;
            out.push_back({"fixed_" + std::to_string(explicit_fixed), Ordering::fixed(spec.permutation)});
        }
    }
    return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t points) {
    std::vector<double> xs;
    if (points == 1) return {lo};
    for (std::size_t k = 0; k < points; ++k) {
        xs.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1));
    }
    return xs;
}

double max_increase(const std::vector<CurvePoint>& curve) {
    double worst = 0.0;
    for (std::size_t k = 1; k < curve.size(); ++k) worst = std::max(worst, curve[k].y - curve[k - 1].y);
    return worst;
}

CalibrationOptions calibration_options(const ExperimentConfig& config) {
    CalibrationOptions o;
    o.tolerance = config.tolerance;
    o.price_cap = config.price_cap;
    o.exec = config.exec;
    return o;
}

void record_calibration(Report& rep, const PriceCalibration& cal, double tolerance) {
    rep.estimates["sold_fraction"] = cal.achieved;
    rep.values["price"] = cal.price;
    rep.values["target"] = cal.target;
    rep.values["residual"] = cal.residual;
    rep.values["price_max"] = cal.price_max;
    rep.values["sold_at_price_max"] = cal.sold_at_max;
    rep.values["bracket_lo"] = cal.bracket_lo;
    rep.values["bracket_hi"] = cal.bracket_hi;
    rep.values["iterations"] = cal.iterations;
    rep.flags["target_unreachable"] = cal.target_unreachable;
    rep.flags["cap_limited"] = cal.cap_limited;
    rep.flags["calibrated"] = cal.attained(tolerance);
    if (cal.target_unreachable) {
        rep.warnings.push_back("TargetUnreachable: the sold-fraction curve steps over the target " + fmt(cal.target) +
                               "; reporting the conservative price " + fmt(cal.price) + " with sold fraction " +
                               fmt(cal.achieved.mean));
    }
    if (cal.cap_limited) {
        rep.warnings.push_back("price cap " + fmt(cal.price_max) + " still sells " + fmt(cal.sold_at_max) +
                               " >= target " + fmt(cal.target));
    }
}

struct CalibratedBatch {
    SampleBatch batch;
    PriceCalibration calibration;
    double price_max = 0.0;
};

CalibratedBatch calibrate_identity(const ExperimentConfig& config, double target) {
    CalibratedBatch out;
    out.batch = kernels::draw_samples(config.agents, Ordering::identity(config.agents.size()), config.samples,
                                      config.seed, config.exec);
    out.price_max = calibration_price_max(config.agents, config.price_cap);
    out.calibration = calibrate(out.batch, target, out.price_max, calibration_options(config));
    return out;
}

void run_calibrate(const ExperimentConfig& config, ExperimentResult& res) {
    Report& rep = res.report;
    const double target = config.target.value();
    const auto orderings = resolve_orderings(config);
    const SampleBatch batch =
        kernels::draw_samples(config.agents, orderings.front().ordering, config.samples, config.seed, config.exec);
    const double price_max = calibration_price_max(config.agents, config.price_cap);
    const PriceCalibration cal = calibrate(batch, target, price_max, calibration_options(config));
    rep.values["tolerance"] = config.tolerance;
    record_calibration(rep, cal, config.tolerance);

    const auto prices = linspace(0.0, price_max, config.curve_points);
    auto curve = sold_fraction_curve(batch, prices, config.exec);
    rep.checks.push_back(make_check("sold_fraction_curve_nonincreasing", max_increase(curve), "<=", 0.0, 1e-12));
    rep.checks.push_back(make_check("sold_at_price_max_below_target", cal.sold_at_max, "<=", target, 0.0, false));
    res.curves.push_back({"curve_sold_fraction.csv", std::move(curve)});
}

void run_welfare_ratio(const ExperimentConfig& config, ExperimentResult& res) {
    Report& rep = res.report;
    const WelfareConstants k = solve_constants();
    rep.values["beta"] = k.beta;
    rep.values["rho1"] = k.rho1;
    rep.values["rho2"] = k.rho2;
    rep.values["tolerance"] = config.tolerance;

    const double target = config.target.value();
    const CalibratedBatch cb = calibrate_identity(config, target);
    record_calibration(rep, cb.calibration, config.tolerance);
    const bool calibrated = cb.calibration.attained(config.tolerance);
    if (!calibrated) {
        rep.warnings.push_back("calibration did not attain the target within tolerance; welfare-ratio bounds are "
                               "reported but not asserted");
    }
    const double price = cb.calibration.price;
    const auto optimal = kernels::optimal_allocations(cb.batch, config.exec);

    for (const auto& [name, ordering] : resolve_orderings(config)) {
        const SampleBatch batch =
            ordering.is_random()
                ? kernels::draw_samples(config.agents, ordering, config.samples, config.seed, config.exec)
                : SampleBatch{cb.batch.profiles, {ordering.permutation()}, false, cb.batch.seed};
        const WelfareRatio wr = welfare_ratio(batch, optimal, price, config.exec);
        rep.estimates["welfare_ratio." + name] = wr.ratio;
        rep.estimates["welfare." + name] = wr.welfare;
        rep.estimates["optimal_welfare." + name] = wr.optimal_welfare;
        rep.checks.push_back(make_check("welfare_ratio." + name, wr.ratio.mean, ">=", target,
                                        config.sigmas * wr.ratio.std_error, calibrated));
        rep.checks.push_back(make_check("sold_identity." + name, wr.max_identity_residual, "<=", 0.0, 1e-12));
        rep.checks.push_back(make_check("welfare_below_optimum." + name, wr.max_excess, "<=", 0.0, 1e-9));
        rep.checks.push_back(
            make_check("welfare_decomposition." + name, wr.max_decomposition_residual, "<=", 0.0, 1e-9));
        rep.checks.push_back(make_check("utilities_nonnegative." + name, wr.min_utility, ">=", 0.0, 1e-12));
    }

    const auto prices = linspace(0.0, cb.price_max, config.curve_points);
    res.curves.push_back({"curve_sold_fraction.csv", sold_fraction_curve(cb.batch, prices, config.exec)});
}

double schedule_max_increase(const ExAnteSolution& sol) {
    double worst = 0.0;
    for (const auto& q : sol.schedule) {
        for (std::size_t c = 1; c < q.size(); ++c) worst = std::max(worst, q[c] - q[c - 1]);
    }
    return worst;
}

void run_revenue_gap(const ExperimentConfig& config, ExperimentResult& res) {
    Report& rep = res.report;
    const RevenueGapReport gap =
        revenue_gap(config.agents, config.grid, config.price_grid, config.samples, config.seed, config.exec);
    const ExAnteSolution& sol = gap.solution;
    rep.values["upper_bound"] = gap.upper_bound;
    rep.values["linear_revenue"] = gap.linear.revenue;
    rep.values["linear_price"] = gap.linear.price;
    rep.values["gap"] = gap.gap;
    rep.values["certificate"] = gap.certificate;
    rep.values["kappa"] = gap.kappa;
    rep.values["grid"] = static_cast<double>(config.grid);
    rep.values["multiplier"] = sol.multiplier;
    rep.values["capacity_used"] = sol.capacity_used;
    rep.values["regularity_checked"] = static_cast<double>(gap.regularity.checked);
    rep.values["regularity_failures"] = static_cast<double>(gap.regularity.failures);
    rep.estimates["linear_revenue"] =
        Estimate{gap.linear.revenue, gap.linear.std_error, gap.linear.exact ? 1 : config.samples, config.seed};
    rep.flags["regular"] = gap.regularity.regular;
    rep.flags["linear_revenue_exact"] = gap.linear.exact;
    bool kinked = false;
    for (const auto& d : config.agents) {
        for (const auto& a : d.atoms()) kinked = kinked || a.valuation.has_kinks();
    }
    rep.flags["kinked_support"] = kinked;
    const bool proportional = proportional_marginals(config.agents, sol.midpoints);
    rep.flags["proportional_marginals"] = proportional;
    if (!gap.regularity.regular) {
        const auto& w = gap.regularity.witness;
        std::string where = gap.regularity.witness_cell ? "cell " + std::to_string(*gap.regularity.witness_cell)
                                                        : std::string("x = 0");
        rep.warnings.push_back("regularity diagnostic failed for agent " + std::to_string(gap.regularity.witness_agent) +
                               " at " + where + " (q = " + fmt(w.witness_q[0]) + ", " + fmt(w.witness_q[1]) + ", " +
                               fmt(w.witness_q[2]) + "); the gap certificate is reported but not asserted");
        rep.values["regularity_witness_violation"] = w.violation;
    }
    if (kinked) rep.warnings.push_back("support contains kinked valuations; marginal values taken as right-derivatives");

    rep.checks.push_back(make_check("relaxation_dominates_linear", gap.upper_bound, ">=", gap.linear.revenue,
                                    config.sigmas * gap.linear.std_error + 1e-9));
    rep.checks.push_back(
        make_check("gap_certificate", gap.gap, "<=", gap.certificate, 1e-12 * gap.certificate, gap.regularity.regular));
    rep.checks.push_back(make_check("capacity", sol.capacity_used, "<=", 1.0, 1e-9));
    // guaranteed only when every agent's marginal values are proportional
    rep.checks.push_back(
        make_check("schedule_nonincreasing", schedule_max_increase(sol), "<=", 0.0, 1e-12, proportional));

    if (config.feasibility) {
        if (gap.linear.revenue > 0.0) {
            FeasibilityOptions fo;
            fo.product_trials = config.product_trials;
            fo.seed = config.seed;
            const FeasibilityReport f = feasibility_check(sol, config.agents, gap.kappa, gap.linear.revenue, fo);
            rep.values["feasibility.bound"] = f.bound;
            rep.values["feasibility.witness_price"] = f.witness_price;
            rep.values["feasibility.max_linear_normalised"] = f.max_linear_normalised;
            rep.values["feasibility.demand_witness_agent"] = static_cast<double>(f.demand_witness_agent);
            rep.values["feasibility.demand_witness_price"] = f.demand_witness_price;
            rep.checks.push_back(make_check("feasibility.pricing_constraint", f.max_constraint, "<=", f.bound, 1e-6));
            rep.checks.push_back(make_check("feasibility.shares", f.share_sum, "<=", 1.0, 1e-9));
            rep.checks.push_back(make_check("feasibility.demand_bound", f.demand_min_margin, ">=", 0.0, 1e-12));
            rep.checks.push_back(make_check("feasibility.product_inequality", f.product_min_margin, ">=", 0.0, 1e-12));
        } else {
            rep.warnings.push_back("best linear revenue is zero; feasibility checks skipped");
        }
    }
    res.curves.push_back({"curve_revenue.csv", gap.linear.curve});
}

void run_lower_bound(const ExperimentConfig& config, ExperimentResult& res) {
    Report& rep = res.report;
    const bool single = config.kappas.size() == 1;
    for (std::size_t k = 0; k < config.kappas.size(); ++k) {
        const LowerBoundInstance lb = lower_bound_instance(config.kappas[k], config.price_grid);
        const std::string key = single ? std::string() : "[kappa=" + fmt(lb.kappa) + "]";
        rep.values["kappa" + key] = lb.kappa;
        rep.values["rho" + key] = lb.rho;
        rep.values["linear_revenue" + key] = lb.linear_revenue;
        rep.values["best_price" + key] = lb.best_price;
        rep.values["plateau" + key] = lb.plateau;
        rep.values["nonlinear_revenue" + key] = lb.nonlinear_revenue;
        rep.values["gap" + key] = lb.gap;
        rep.checks.push_back(make_check("plateau" + key, lb.linear_revenue, "==", lb.plateau, 1e-6));
        rep.checks.push_back(make_check("nonlinear_benchmark" + key, lb.nonlinear_revenue, "==", 1.0, 1e-12));
        rep.checks.push_back(make_check("gap_at_least_rho" + key, lb.gap, ">=", lb.rho, 1e-6));
        rep.checks.push_back(make_check("rho_at_least_1_plus_ln_kappa" + key, lb.rho, ">=",
                                        1.0 + std::log(lb.kappa), 1e-6));
        rep.checks.push_back(make_check("gap_at_least_1_plus_ln_kappa" + key, lb.gap, ">=",
                                        1.0 + std::log(lb.kappa), 1e-6));
        res.curves.push_back({single ? "curve_revenue.csv" : "curve_revenue_" + std::to_string(k + 1) + ".csv",
                              lb.curve});
    }
}

std::vector<DiscreteVariable> random_variables(Engine& rng, bool bernoulli) {
    const std::size_t k = 1 + static_cast<std::size_t>(rng() % 4);
    std::vector<DiscreteVariable> vars(k);
    for (auto& var : vars) {
        if (bernoulli) {
            const double p = uniform01(rng);
            var.atoms = {{0.0, 1.0 - p}, {1.0, p}};
            continue;
        }
        const std::size_t m = 1 + static_cast<std::size_t>(rng() % 4);
        double total = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            const double w = uniform01(rng) + 1e-3;
            var.atoms.emplace_back(uniform01(rng), w);
            total += w;
        }
        for (auto& atom : var.atoms) atom.second /= total;
    }
    return vars;
}

void run_verify_lemmas(const ExperimentConfig& config, ExperimentResult& res) {
    Report& rep = res.report;
    const WelfareConstants k = solve_constants();
    rep.values["beta"] = k.beta;
    rep.values["tolerance"] = config.tolerance;
    const std::size_t n = config.agents.size();

    double price = 0.0;
    if (config.price) {
        price = *config.price;
        rep.values["price"] = price;
    } else {
        const CalibratedBatch cb = calibrate_identity(config, config.target.value());
        record_calibration(rep, cb.calibration, config.tolerance);
        price = cb.calibration.price;
    }

    for (const auto& [name, ordering] : resolve_orderings(config)) {
        if (ordering.is_random()) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const LemmaReport lr = check_aux_lemma(config.agents, price, ordering.permutation(), i, k.beta,
                                                   config.samples, config.seed, config.exec);
            const std::string key = "utility_bound." + name + ".agent_" + std::to_string(i);
            rep.estimates[key + ".margin"] = Estimate{lr.margin, lr.std_error, lr.samples, config.seed};
            rep.checks.push_back(make_check(key, lr.lhs, ">=", lr.rhs, config.sigmas * lr.std_error + 1e-12));
        }
    }
    for (double alpha : config.alphas) {
        for (std::size_t i = 0; i < n; ++i) {
            const LemmaReport lr =
                check_random_order_lemma(config.agents, price, alpha, i, config.samples, config.seed, config.exec);
            const std::string key = "random_order[alpha=" + fmt(alpha) + "].agent_" + std::to_string(i);
            rep.estimates[key + ".margin"] = Estimate{lr.margin, lr.std_error, lr.samples, config.seed};
            rep.checks.push_back(make_check(key, lr.rhs, ">=", lr.lhs, config.sigmas * lr.std_error + 1e-12));
        }
    }

    double min_margin = kInfinity;
    double max_bernoulli_gap = 0.0;
    for (std::size_t t = 0; t < config.min_lemma_instances; ++t) {
        Engine rng = make_engine(config.seed, Stream::Instances, t);
        const bool bernoulli = t % 10 == 0;
        const auto vars = random_variables(rng, bernoulli);
        const MinLemmaResult r = min_lemma_oracle(vars);
        min_margin = std::min(min_margin, r.exact - r.bound);
        if (bernoulli) max_bernoulli_gap = std::max(max_bernoulli_gap, std::abs(r.exact - r.bound));
    }
    if (config.min_lemma_instances > 0) {
        rep.values["min_lemma.instances"] = static_cast<double>(config.min_lemma_instances);
        rep.checks.push_back(make_check("min_lemma.bound", min_margin, ">=", 0.0, 1e-12));
        rep.checks.push_back(make_check("min_lemma.bernoulli_equality", max_bernoulli_gap, "<=", 0.0, 1e-12));
    }
    const ProductLemmaResult pl = product_lemma_check(config.product_trials, config.seed);
    rep.values["product_inequality.trials"] = static_cast<double>(pl.trials);
    rep.checks.push_back(make_check("product_inequality", pl.min_margin, ">=", 0.0, 1e-12));
}

double json_number(const json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    out.close();
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

// ---------------------------------------------------------------- public API

std::string_view task_name(Task task) {
    switch (task) {
        case Task::Calibrate: return "calibrate";
        case Task::WelfareRatio: return "welfare-ratio";
        case Task::RevenueGap: return "revenue-gap";
        case Task::LowerBound: return "lower-bound";
        case Task::VerifyLemmas: return "verify-lemmas";
    }
    return "unknown";
}

std::optional<Task> parse_task(std::string_view name) {
    for (Task t : {Task::Calibrate, Task::WelfareRatio, Task::RevenueGap, Task::LowerBound, Task::VerifyLemmas}) {
        if (task_name(t) == name) return t;
    }
    return std::nullopt;
}

double TargetSpec::value() const {
    switch (kind) {
        case Kind::Rho1: return solve_constants().rho1;
        case Kind::Rho2: return solve_constants().rho2;
        case Kind::Custom: return custom;
    }
    return custom;
}

std::string TargetSpec::label() const {
    switch (kind) {
        case Kind::Rho1: return "rho1";
        case Kind::Rho2: return "rho2";
        case Kind::Custom: return fmt(custom);
    }
    return "custom";
}

ExperimentConfig parse_config(const json& doc, std::optional<Task> expected) {
    check_keys(doc, "", {"task", "seed", "samples", "instance", "target", "orderings", "tolerance", "price_cap",
                         "price", "grid", "price_grid", "kappa", "feasibility", "curve_points", "alphas",
                         "min_lemma_instances", "product_trials", "sigmas", "exec", "output"});
    ExperimentConfig c;
    if (doc.contains("task")) {
        const std::string name = as_string(doc.at("task"), "task");
        const auto t = parse_task(name);
        if (!t) fail("task", "unknown task '" + name + "'");
        if (expected && *expected != *t) {
            fail("task", "config is for '" + name + "' but the subcommand is '" + std::string(task_name(*expected)) +
                             "'");
        }
        c.task = *t;
    } else if (expected) {
        c.task = *expected;
    } else {
        fail("task", "missing required field");
    }

    if (doc.contains("seed")) c.seed = as_u64(doc.at("seed"), "seed");
    if (doc.contains("samples")) c.samples = as_count(doc.at("samples"), "samples");
    if (doc.contains("instance")) {
        c.agents = parse_instance(doc.at("instance"), "instance");
    } else if (c.task != Task::LowerBound) {
        fail("instance", "missing required field");
    }
    if (doc.contains("target")) c.target = parse_target(doc.at("target"), "target");
    if (doc.contains("orderings")) {
        c.orderings = parse_orderings(doc.at("orderings"), "orderings", c.agents.size());
    } else {
        c.orderings = default_orderings(c.task, c.target);
    }
    if (doc.contains("tolerance")) {
        c.tolerance = as_number(doc.at("tolerance"), "tolerance");
        if (!(c.tolerance > 0.0)) fail("tolerance", "must be > 0");
    }
    if (doc.contains("price_cap")) {
        c.price_cap = as_number(doc.at("price_cap"), "price_cap");
        if (!(c.price_cap > 0.0)) fail("price_cap", "must be > 0");
    }
    c.price_grid.price_cap = c.price_cap;
    if (doc.contains("price")) {
        c.price = as_number(doc.at("price"), "price");
        if (!(*c.price >= 0.0)) fail("price", "must be >= 0");
    }
    if (doc.contains("grid")) c.grid = as_count(doc.at("grid"), "grid");
    if (doc.contains("price_grid")) {
        const json& g = doc.at("price_grid");
        check_keys(g, "price_grid", {"points", "decades"});
        if (g.contains("points")) {
            c.price_grid.points = as_count(g.at("points"), "price_grid.points");
            if (c.price_grid.points < 64) fail("price_grid.points", "must be >= 64");
        }
        if (g.contains("decades")) {
            c.price_grid.decades = as_number(g.at("decades"), "price_grid.decades");
            if (!(c.price_grid.decades > 0.0)) fail("price_grid.decades", "must be > 0");
        }
    }
    if (doc.contains("kappa")) {
        const json& k = doc.at("kappa");
        if (k.is_array()) {
            if (k.empty()) fail("kappa", "expected a nonempty array");
            for (std::size_t i = 0; i < k.size(); ++i) c.kappas.push_back(as_number(k[i], index("kappa", i)));
        } else {
            c.kappas.push_back(as_number(k, "kappa"));
        }
        for (std::size_t i = 0; i < c.kappas.size(); ++i) {
            if (!(c.kappas[i] > 1.0)) fail(k.is_array() ? index("kappa", i) : "kappa", "must be > 1");
        }
    } else if (c.task == Task::LowerBound) {
        fail("kappa", "missing required field");
    }
    if (doc.contains("feasibility")) c.feasibility = as_bool(doc.at("feasibility"), "feasibility");
    if (doc.contains("curve_points")) {
        c.curve_points = as_count(doc.at("curve_points"), "curve_points");
        if (c.curve_points < 2) fail("curve_points", "must be >= 2");
    }
    if (doc.contains("alphas")) {
        const json& a = doc.at("alphas");
        if (!a.is_array() || a.empty()) fail("alphas", "expected a nonempty array");
        c.alphas.clear();
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double x = as_number(a[i], index("alphas", i));
            if (!(x > 0.0)) fail(index("alphas", i), "must be > 0");
            c.alphas.push_back(x);
        }
    }
    if (doc.contains("min_lemma_instances")) c.min_lemma_instances = as_u64(doc.at("min_lemma_instances"), "min_lemma_instances");
    if (doc.contains("product_trials")) c.product_trials = as_u64(doc.at("product_trials"), "product_trials");
    if (doc.contains("sigmas")) {
        c.sigmas = as_number(doc.at("sigmas"), "sigmas");
        if (!(c.sigmas >= 0.0)) fail("sigmas", "must be >= 0");
    }
    if (doc.contains("exec")) {
        const std::string e = as_string(doc.at("exec"), "exec");
        if (e == "serial") {
            c.exec = Exec::Serial;
        } else if (e == "parallel") {
            c.exec = Exec::Parallel;
        } else {
            fail("exec", "expected 'serial' or 'parallel'");
        }
    }
    if (doc.contains("output")) {
        const json& o = doc.at("output");
        check_keys(o, "output", {"dir"});
        if (o.contains("dir")) c.output_dir = as_string(o.at("dir"), "output.dir");
    }
    c.source = doc;
    c.source["task"] = std::string(task_name(c.task));
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<Task> expected) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    json doc;
    try {
        doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(doc, expected);
}

void override_seed(ExperimentConfig& config, std::uint64_t seed) {
    config.seed = seed;
    config.source["seed"] = seed;
}

void override_samples(ExperimentConfig& config, std::size_t samples) {
    if (samples == 0) throw ConfigError("samples: must be a positive integer");
    config.samples = samples;
    config.source["samples"] = samples;
}

Check make_check(std::string name, double value, std::string relation, double bound, double tolerance,
                 bool asserted) {
    Check c;
    c.name = std::move(name);
    c.relation = std::move(relation);
    c.value = value;
    c.bound = bound;
    c.tolerance = tolerance;
    c.asserted = asserted;
    if (c.relation == ">=") {
        c.margin = value - bound;
    } else if (c.relation == "<=") {
        c.margin = bound - value;
    } else {
        c.margin = -std::abs(value - bound);
    }
    c.passed = c.margin >= -tolerance;
    return c;
}

bool Report::passed() const { return failed_checks() == 0; }

std::size_t Report::failed_checks() const {
    return static_cast<std::size_t>(
        std::count_if(checks.begin(), checks.end(), [](const Check& c) { return c.asserted && !c.passed; }));
}

json Report::to_json() const {
    json j;
    j["tool"] = tool;
    j["version"] = version;
    j["task"] = task;
    j["seed"] = seed;
    j["samples"] = samples;
    j["config"] = config;
    json est = json::object();
    for (const auto& [name, e] : estimates) {
        est[name] = {{"mean", e.mean}, {"stderr", e.std_error}, {"samples", e.samples}, {"seed", e.seed}};
    }
    j["estimates"] = est;
    j["values"] = values.empty() ? json::object() : json(values);
    j["flags"] = flags.empty() ? json::object() : json(flags);
    json cs = json::array();
    for (const auto& c : checks) {
        cs.push_back({{"name", c.name},
                      {"relation", c.relation},
                      {"value", c.value},
                      {"bound", c.bound},
                      {"margin", c.margin},
                      {"tolerance", c.tolerance},
                      {"asserted", c.asserted},
                      {"passed", c.passed}});
    }
    j["checks"] = cs;
    j["warnings"] = warnings;
    j["curves"] = curves;
    j["failed_checks"] = failed_checks();
    j["passed"] = passed();
    return j;
}

Report Report::from_json(const json& j) {
    Report r;
    r.tool = j.at("tool").get<std::string>();
    r.version = j.at("version").get<std::string>();
    r.task = j.at("task").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.samples = j.at("samples").get<std::size_t>();
    r.config = j.at("config");
    for (const auto& [name, e] : j.at("estimates").items()) {
        r.estimates[name] = Estimate{json_number(e.at("mean")), json_number(e.at("stderr")),
                                     e.at("samples").get<std::size_t>(), e.at("seed").get<std::uint64_t>()};
    }
    for (const auto& [name, v] : j.at("values").items()) r.values[name] = json_number(v);
    for (const auto& [name, v] : j.at("flags").items()) r.flags[name] = v.get<bool>();
    for (const auto& c : j.at("checks")) {
        Check k;
        k.name = c.at("name").get<std::string>();
        k.relation = c.at("relation").get<std::string>();
        k.value = json_number(c.at("value"));
        k.bound = json_number(c.at("bound"));
        k.margin = json_number(c.at("margin"));
        k.tolerance = json_number(c.at("tolerance"));
        k.asserted = c.at("asserted").get<bool>();
        k.passed = c.at("passed").get<bool>();
        r.checks.push_back(std::move(k));
    }
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    r.curves = j.at("curves").get<std::vector<std::string>>();
    return r;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    ExperimentResult res;
    Report& rep = res.report;
    rep.task = std::string(task_name(config.task));
    rep.config = config.source;
    rep.seed = config.seed;
    rep.samples = config.samples;
    for (const auto& spec : config.orderings) {
        if (spec.kind == "fixed" && !is_permutation_of(spec.permutation, config.agents.size())) {
            throw ConfigError("orderings: permutation does not match the number of agents");
        }
    }
    try {
        switch (config.task) {
            case Task::Calibrate: run_calibrate(config, res); break;
            case Task::WelfareRatio: run_welfare_ratio(config, res); break;
            case Task::RevenueGap: run_revenue_gap(config, res); break;
            case Task::LowerBound: run_lower_bound(config, res); break;
            case Task::VerifyLemmas: run_verify_lemmas(config, res); break;
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw std::runtime_error(rep.task + ": " + e.what());
    }
    for (const auto& c : res.curves) rep.curves.push_back(c.file);
    rep.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

std::string format_curve(std::span<const CurvePoint> series) {
    std::string out = "x,y,stderr\n";
    char buf[128];
    for (const auto& p : series) {
        std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g\n", p.x, p.y, p.std_error);
        out += buf;
    }
    return out;
}

void emit_curve(std::span<const CurvePoint> series, const std::filesystem::path& path) {
    if (series.empty()) throw DomainError("emit_curve: empty series for " + path.string());
    write_text(path, format_curve(series));
}

void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
    write_text(dir / "report.json", result.report.to_json().dump(2) + "\n");
    for (const auto& c : result.curves) emit_curve(c.points, dir / c.file);
    const json info = {{"wall_clock_seconds", result.report.wall_clock_seconds}, {"threads", kernels::max_threads()}};
    write_text(dir / "run_info.json", info.dump(2) + "\n");
}

int exit_code(const Report& report) { return report.passed() ? 0 : 1; }

}  // namespace divprice
