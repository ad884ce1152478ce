#include "divprice/revenue.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "divprice/errors.hpp"
#include "divprice/mechanism.hpp"

namespace divprice {

namespace {

constexpr double kTailTolerance = 1e-12;

// Candidate choice of one cell at capacity price lambda: index into the
// distribution's atoms (quantile = tail, price = atom), or none (q = 0).
struct CellChoice {
    double q = 0.0;
    double revenue = 0.0;
};

// Best candidate for max_q q F^{-1}(1-q) - lambda q. Ties go to the smaller
// quantile when `prefer_small`, otherwise to the larger one.
CellChoice choose(const DerivativeDistribution& d, double lambda, bool prefer_small) {
    CellChoice best;
    double best_value = 0.0;
    const auto& values = d.values();
    const auto& tails = d.tails();
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double q = tails[k];
        const double rev = q * values[k];
        const double val = rev - lambda * q;
        const bool better = prefer_small ? (val > best_value || (val == best_value && q < best.q))
                                         : (val > best_value || (val == best_value && q > best.q));
        if (better) {
            best_value = val;
            best = CellChoice{q, rev};
        }
    }
    return best;
}

double capacity(const DerivativeTable& table, double lambda, bool prefer_small) {
    const double width = 1.0 / static_cast<double>(table.grid);
    double used = 0.0;
    for (const auto& agent : table.cells) {
        for (const auto& cell : agent) used += width * choose(cell, lambda, prefer_small).q;
    }
    return used;
}

std::vector<std::vector<Atom>> discrete_atoms(std::span<const ValuationDistribution> dists) {
    std::vector<std::vector<Atom>> out;
    for (const auto& d : dists) out.push_back(d.atoms());
    return out;
}

double mean_demand(const std::vector<Atom>& atoms, double price) {
    double sum = 0.0;
    for (const auto& a : atoms) sum += a.prob * a.valuation.inv_deriv(price);
    return sum;
}

// E[min{1, sum_i y*_i}] by enumerating the joint support depth-first.
double exact_sold(const std::vector<std::vector<std::pair<double, double>>>& demand, std::size_t agent,
                  double partial, double prob) {
    if (agent == demand.size()) return prob * std::min(1.0, partial);
    double sum = 0.0;
    for (const auto& [y, p] : demand[agent]) {
        if (p == 0.0) continue;
        sum += exact_sold(demand, agent + 1, partial + y, prob * p);
    }
    return sum;
}

}  // namespace

// ---------------------------------------------------------------- DerivativeDistribution

DerivativeDistribution DerivativeDistribution::from_atoms(std::vector<std::pair<double, double>> atoms) {
    std::sort(atoms.begin(), atoms.end());
    DerivativeDistribution d;
    for (const auto& [v, p] : atoms) {
        if (!(p >= 0.0)) throw DomainError("derivative distribution: negative probability");
        if (!std::isfinite(v)) throw UnsupportedValuation("derivative distribution: unbounded marginal value");
        if (p == 0.0) continue;
        if (!d.values_.empty() && d.values_.back() == v) {
            d.cum_.back() += p;
        } else {
            d.values_.push_back(v);
            d.cum_.push_back(p);
        }
    }
    if (d.values_.empty()) throw DomainError("derivative distribution: no atoms with positive probability");
    double run = 0.0;
    for (double& c : d.cum_) {
        run += c;
        c = run;
    }
    const double total = d.cum_.back();
    for (double& c : d.cum_) c /= total;
    d.cum_.back() = 1.0;
    d.tails_.resize(d.values_.size());
    d.tails_[0] = 1.0;
    for (std::size_t k = 1; k < d.values_.size(); ++k) d.tails_[k] = 1.0 - d.cum_[k - 1];
    return d;
}

double DerivativeDistribution::cdf(double t) const {
    const auto it = std::upper_bound(values_.begin(), values_.end(), t);
    if (it == values_.begin()) return 0.0;
    return cum_[static_cast<std::size_t>(it - values_.begin()) - 1];
}

double DerivativeDistribution::price_at_quantile(double q) const {
    if (q <= 0.0) return values_.back();
    // tails are decreasing in k; find the last k with tail >= q
    std::size_t k = 0;
    while (k + 1 < tails_.size() && tails_[k + 1] >= q - kTailTolerance) ++k;
    return values_[k];
}

// ---------------------------------------------------------------- tables

DerivativeTable derivative_distributions(std::span<const ValuationDistribution> dists, std::size_t grid) {
    if (grid == 0) throw DomainError("derivative_distributions: grid must be >= 1");
    if (dists.empty()) throw DomainError("derivative_distributions: need at least one agent");
    DerivativeTable table;
    table.grid = grid;
    for (std::size_t c = 0; c < grid; ++c) {
        table.midpoints.push_back((static_cast<double>(c) + 0.5) / static_cast<double>(grid));
    }
    for (const auto& dist : dists) {
        const std::vector<Atom> atoms = dist.atoms();
        bool kinked = false;
        std::vector<std::pair<double, double>> at0;
        for (const auto& a : atoms) {
            const double d0 = a.valuation.deriv(0.0);
            if (!std::isfinite(d0)) {
                throw UnsupportedValuation("derivative_distributions: unbounded marginal value at zero for " +
                                           a.valuation.describe());
            }
            at0.emplace_back(d0, a.prob);
            kinked = kinked || a.valuation.has_kinks();
        }
        table.at_zero.push_back(DerivativeDistribution::from_atoms(std::move(at0)));
        table.kinked.push_back(kinked);

        std::vector<DerivativeDistribution> cells;
        cells.reserve(grid);
        for (double x : table.midpoints) {
            std::vector<std::pair<double, double>> pts;
            for (const auto& a : atoms) pts.emplace_back(a.valuation.deriv(x), a.prob);
            cells.push_back(DerivativeDistribution::from_atoms(std::move(pts)));
        }
        table.cells.push_back(std::move(cells));
    }
    return table;
}

RegularityResult regularity_diagnostic(const DerivativeDistribution& dist) {
    const std::size_t n = kRegularityGridPoints;
    std::vector<double> q(n), r(n);
    double scale = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
        q[j] = static_cast<double>(j + 1) / static_cast<double>(n);
        r[j] = dist.revenue_at_quantile(q[j]);
        scale = std::max(scale, std::abs(r[j]));
    }
    const double tol = 1e-9 * scale;
    RegularityResult res;
    for (std::size_t j = 1; j + 1 < n; ++j) {
        const double shortfall = 0.5 * (r[j - 1] + r[j + 1]) - r[j];
        if (shortfall > tol && shortfall > res.violation) {
            res.regular = false;
            res.violation = shortfall;
            res.witness_q = {q[j - 1], q[j], q[j + 1]};
            res.witness_r = {r[j - 1], r[j], r[j + 1]};
        }
    }
    return res;
}

TableRegularity regularity_diagnostic(const DerivativeTable& table) {
    TableRegularity out;
    auto visit = [&out](const DerivativeDistribution& d, std::size_t agent, std::optional<std::size_t> cell) {
        ++out.checked;
        const RegularityResult r = regularity_diagnostic(d);
        if (!r.regular) {
            if (out.regular) {
                out.witness_agent = agent;
                out.witness_cell = cell;
                out.witness = r;
            }
            out.regular = false;
            ++out.failures;
        }
    };
    for (std::size_t i = 0; i < table.agents(); ++i) {
        visit(table.at_zero[i], i, std::nullopt);
        for (std::size_t c = 0; c < table.grid; ++c) visit(table.cells[i][c], i, c);
    }
    return out;
}

// ---------------------------------------------------------------- ex-ante relaxation

ExAnteSolution exante_upper_bound(const DerivativeTable& table, double kappa) {
    if (table.grid == 0 || table.agents() == 0) throw DomainError("exante_upper_bound: empty table");
    const std::size_t n = table.agents();
    const std::size_t m = table.grid;
    const double width = 1.0 / static_cast<double>(m);

    ExAnteSolution sol;
    sol.grid = m;
    sol.cell_width = width;
    sol.midpoints = table.midpoints;
    sol.kappa = kappa;
    sol.at_zero = table.at_zero;

    double lo = 0.0;
    double hi = 0.0;
    if (capacity(table, 0.0, true) > 1.0) {
        for (const auto& agent : table.cells) {
            for (const auto& cell : agent) hi = std::max(hi, cell.values().back());
        }
        hi = hi * 2.0 + 1.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid == lo || mid == hi) break;
            if (capacity(table, mid, true) > 1.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    sol.multiplier = hi;

    // Choices at both ends of the final bracket; mix with a common weight so
    // that the capacity constraint binds exactly.
    const double cap_hi = capacity(table, hi, true);
    const double cap_lo = hi > 0.0 ? capacity(table, lo, true) : cap_hi;
    double theta = 0.0;
    if (cap_lo > cap_hi && cap_hi < 1.0) theta = std::min(1.0, (1.0 - cap_hi) / (cap_lo - cap_hi));

    sol.schedule.assign(n, std::vector<double>(m, 0.0));
    sol.shares.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < m; ++c) {
            const CellChoice at_hi = choose(table.cells[i][c], hi, true);
            CellChoice mixed = at_hi;
            if (theta > 0.0) {
                const CellChoice at_lo = choose(table.cells[i][c], lo, true);
                mixed.q = (1.0 - theta) * at_hi.q + theta * at_lo.q;
                mixed.revenue = (1.0 - theta) * at_hi.revenue + theta * at_lo.revenue;
            }
            sol.schedule[i][c] = mixed.q;
            sol.shares[i] += width * mixed.q;
            sol.objective += width * mixed.revenue;
        }
        sol.capacity_used += sol.shares[i];
        for (std::size_t c = 1; c < m; ++c) {
            if (sol.schedule[i][c] > sol.schedule[i][c - 1] + 1e-12) sol.monotone_schedule = false;
        }
    }
    return sol;
}

bool proportional_marginals(std::span<const ValuationDistribution> dists, std::span<const double> points) {
    for (const auto& d : dists) {
        const std::vector<Atom> atoms = d.atoms();
        if (atoms.size() < 2) continue;
        std::vector<double> xs{0.0};
        xs.insert(xs.end(), points.begin(), points.end());
        // reference: the atom with the largest slope at zero
        std::size_t r = 0;
        for (std::size_t k = 1; k < atoms.size(); ++k) {
            if (atoms[k].valuation.deriv(0.0) > atoms[r].valuation.deriv(0.0)) r = k;
        }
        const double r0 = atoms[r].valuation.deriv(0.0);
        if (!std::isfinite(r0)) return false;
        for (const auto& a : atoms) {
            const double a0 = a.valuation.deriv(0.0);
            for (double x : xs) {
                const double ax = a.valuation.deriv(x);
                const double rx = atoms[r].valuation.deriv(x);
                if (std::abs(ax * r0 - rx * a0) > 1e-9 * std::max(1.0, r0 * r0)) return false;
            }
        }
    }
    return true;
}

// ---------------------------------------------------------------- min lemma

double min_lemma_bound(std::span<const double> expectations) {
    double prod = 1.0;
    for (double e : expectations) {
        if (!(e >= 0.0 && e <= 1.0)) throw DomainError("min_lemma_bound: expectations must lie in [0,1]");
        prod *= 1.0 - e;
    }
    return 1.0 - prod;
}

double DiscreteVariable::mean() const {
    double m = 0.0;
    for (const auto& [v, p] : atoms) m += v * p;
    return m;
}

MinLemmaResult min_lemma_oracle(std::span<const DiscreteVariable> vars) {
    if (vars.size() > kMinLemmaMaxVariables) {
        throw EnumerationTooLarge("min_lemma_oracle: at most 6 variables");
    }
    double outcomes = 1.0;
    std::vector<double> means;
    std::vector<std::vector<std::pair<double, double>>> support;
    for (const auto& var : vars) {
        if (var.atoms.empty()) throw DomainError("min_lemma_oracle: variable without atoms");
        double total = 0.0;
        for (const auto& [v, p] : var.atoms) {
            if (!(v >= 0.0 && v <= 1.0)) throw DomainError("min_lemma_oracle: values must lie in [0,1]");
            if (!(p >= 0.0)) throw DomainError("min_lemma_oracle: negative probability");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-12) throw DomainError("min_lemma_oracle: probabilities must sum to 1");
        outcomes *= static_cast<double>(var.atoms.size());
        means.push_back(var.mean());
        support.push_back(var.atoms);
    }
    if (outcomes > static_cast<double>(kMinLemmaMaxOutcomes)) {
        throw EnumerationTooLarge("min_lemma_oracle: more than 10^6 joint outcomes");
    }
    MinLemmaResult res;
    res.exact = exact_sold(support, 0, 0.0, 1.0);
    res.bound = min_lemma_bound(means);
    res.holds = res.exact >= res.bound - 1e-12;
    return res;
}

// ---------------------------------------------------------------- linear pricing

RevenueCurve::RevenueCurve(std::span<const ValuationDistribution> dists, std::size_t samples, std::uint64_t seed,
                           Exec exec)
    : exec_(exec) {
    if (dists.empty()) throw DomainError("linear revenue: need at least one agent");
    double joint = 1.0;
    bool discrete = true;
    for (const auto& d : dists) {
        discrete = discrete && d.is_discrete();
        if (discrete) joint *= static_cast<double>(d.support_size());
        max_slope_ = std::max(max_slope_, d.max_slope_at_zero());
        for (double p : d.critical_prices()) critical_.push_back(p);
    }
    exact_ = discrete && joint <= static_cast<double>(kExactEnumerationLimit);
    if (discrete) atoms_ = discrete_atoms(dists);
    if (!exact_) {
        if (samples == 0) throw DomainError("linear revenue: samples must be >= 1 for sampled supports");
        batch_ = kernels::draw_samples(dists, Ordering::identity(dists.size()), samples, seed, exec);
    }
    std::sort(critical_.begin(), critical_.end());
    critical_.erase(std::unique(critical_.begin(), critical_.end()), critical_.end());
}

std::vector<double> RevenueCurve::mean_demands(double price) const {
    if (!atoms_.empty()) {
        std::vector<double> out;
        for (const auto& a : atoms_) out.push_back(mean_demand(a, price));
        return out;
    }
    const std::size_t n = batch_.agents();
    std::vector<double> out(n, 0.0);
    for (const auto& profile : batch_.profiles) {
        for (std::size_t i = 0; i < n; ++i) out[i] += profile[i].inv_deriv(price);
    }
    for (double& x : out) x /= static_cast<double>(batch_.size());
    return out;
}

LinearRevenue RevenueCurve::at(double price) const {
    if (!(price >= 0.0)) throw DomainError("linear revenue: price must be >= 0");
    LinearRevenue out;
    out.exact = exact_;
    if (exact_) {
        std::vector<std::vector<std::pair<double, double>>> demand;
        for (const auto& agent : atoms_) {
            std::vector<std::pair<double, double>> ys;
            for (const auto& a : agent) ys.emplace_back(a.valuation.inv_deriv(price), a.prob);
            demand.push_back(std::move(ys));
        }
        out.sold = exact_estimate(exact_sold(demand, 0, 0.0, 1.0));
    } else {
        out.sold = sold_fraction(batch_, price, exec_);
    }
    out.revenue = Estimate{price * out.sold.mean, price * out.sold.std_error, out.sold.samples, out.sold.seed};
    const auto means = mean_demands(price);
    std::vector<double> clipped;
    for (double e : means) clipped.push_back(std::clamp(e, 0.0, 1.0));
    out.lower_bound = price * min_lemma_bound(clipped);
    return out;
}

LinearRevenue linear_revenue(std::span<const ValuationDistribution> dists, double price, std::size_t samples,
                             std::uint64_t seed, Exec exec) {
    return RevenueCurve(dists, samples, seed, exec).at(price);
}

BestLinearRevenue best_linear_revenue(std::span<const ValuationDistribution> dists, const PriceGridSpec& grid,
                                      std::size_t samples, std::uint64_t seed, Exec exec) {
    if (grid.points < 64) throw DomainError("best_linear_revenue: price grid needs at least 64 points");
    if (!(grid.decades > 0.0)) throw DomainError("best_linear_revenue: grid span must be positive");
    const RevenueCurve curve(dists, samples, seed, exec);
    const double p_max = std::isfinite(curve.max_slope()) ? curve.max_slope() : grid.price_cap;
    if (!(p_max > 0.0)) {
        BestLinearRevenue none;
        none.exact = curve.exact();
        return none;
    }

    std::vector<double> prices;
    const double n1 = static_cast<double>(grid.points - 1);
    for (std::size_t j = 0; j < grid.points; ++j) {
        prices.push_back(p_max * std::pow(10.0, -grid.decades * (1.0 - static_cast<double>(j) / n1)));
    }
    prices.back() = p_max;
    for (double p : curve.critical_prices()) {
        if (p > 0.0 && p <= p_max) prices.push_back(p);
    }
    std::sort(prices.begin(), prices.end());
    prices.erase(std::unique(prices.begin(), prices.end()), prices.end());

    BestLinearRevenue best;
    best.exact = curve.exact();
    std::size_t best_index = 0;
    for (std::size_t j = 0; j < prices.size(); ++j) {
        const LinearRevenue r = curve.at(prices[j]);
        best.curve.push_back(CurvePoint{prices[j], r.revenue.mean, r.revenue.std_error});
        if (r.revenue.mean > best.revenue) {
            best.revenue = r.revenue.mean;
            best.std_error = r.revenue.std_error;
            best.price = prices[j];
            best_index = j;
        }
    }

    auto consider = [&](double p) {
        const LinearRevenue r = curve.at(p);
        if (r.revenue.mean > best.revenue) {
            best.revenue = r.revenue.mean;
            best.std_error = r.revenue.std_error;
            best.price = p;
        }
        return r.revenue.mean;
    };
    auto golden = [&](double a, double b) {
        const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
        double c = b - inv_phi * (b - a);
        double d = a + inv_phi * (b - a);
        double fc = consider(c);
        double fd = consider(d);
        for (int it = 0; it < 100 && b - a > 1e-12 * b; ++it) {
            if (fc >= fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = consider(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = consider(d);
            }
        }
    };
    if (best_index > 0) golden(prices[best_index - 1], prices[best_index]);
    if (best_index + 1 < prices.size()) golden(prices[best_index], prices[best_index + 1]);
    return best;
}

// ---------------------------------------------------------------- revenue gap

RevenueGapReport revenue_gap(std::span<const ValuationDistribution> dists, std::size_t grid,
                             const PriceGridSpec& prices, std::size_t samples, std::uint64_t seed, Exec exec) {
    RevenueGapReport rep;
    const DerivativeTable table = derivative_distributions(dists, grid);
    double kappa = 1.0;
    for (const auto& d : dists) kappa = std::max(kappa, d.max_curvature());
    if (!std::isfinite(kappa)) throw UnsupportedValuation("revenue_gap: unbounded curvature");
    rep.kappa = kappa;
    rep.solution = exante_upper_bound(table, kappa);
    rep.upper_bound = rep.solution.objective;
    rep.linear = best_linear_revenue(dists, prices, samples, seed, exec);
    rep.gap = rep.linear.revenue > 0.0 ? rep.upper_bound / rep.linear.revenue : kInfinity;
    rep.certificate = 2.0 * kappa * (2.0 * kappa - 1.0) * std::numbers::e;
    rep.regularity = regularity_diagnostic(table);
    rep.certificate_holds = rep.gap <= rep.certificate * (1.0 + 1e-12);
    rep.dominance_holds = rep.upper_bound >= rep.linear.revenue - 3.0 * rep.linear.std_error - 1e-9;
    return rep;
}

ProductLemmaResult product_lemma_check(std::size_t trials, std::uint64_t seed) {
    ProductLemmaResult res;
    res.trials = trials;
    res.min_margin = trials == 0 ? 0.0 : kInfinity;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Engine rng = make_engine(seed, Stream::LemmaTuples, trial);
        const std::size_t k = 1 + static_cast<std::size_t>(rng() % 8);
        const double t = 1.0 - uniform01(rng);
        double prod_t = 1.0;
        double prod = 1.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double u = uniform01(rng);
            const double z = u < 0.1 ? 0.0 : (u > 0.9 ? 1.0 : uniform01(rng));
            prod_t *= 1.0 - t * z;
            prod *= 1.0 - z;
        }
        res.min_margin = std::min(res.min_margin, (1.0 - prod_t) - t * (1.0 - prod));
    }
    res.holds = res.min_margin >= -1e-12;
    return res;
}

FeasibilityReport feasibility_check(const ExAnteSolution& solution, std::span<const ValuationDistribution> dists,
                                    double kappa, double revenue_scale, const FeasibilityOptions& options) {
    if (!(kappa >= 1.0)) throw DomainError("feasibility_check: kappa must be >= 1");
    if (!(revenue_scale > 0.0)) throw DomainError("feasibility_check: revenue scale must be > 0");
    if (dists.size() != solution.at_zero.size()) throw DomainError("feasibility_check: agent count mismatch");
    const auto atoms = discrete_atoms(dists);
    const std::size_t n = dists.size();
    const double bound = 2.0 * kappa - 1.0;
    const auto points = static_cast<double>(options.price_points);

    FeasibilityReport rep;
    rep.bound = bound;

    // anonymous-pricing constraint for (r, H) in rescaled prices
    for (std::size_t j = 1; j <= options.price_points; ++j) {
        const double p = bound * std::pow(100.0, static_cast<double>(j) / points);
        double prod = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            prod *= solution.at_zero[i].cdf(2.0 * kappa * p * revenue_scale);
        }
        const double lhs = p * (1.0 - prod);
        if (lhs > rep.max_constraint) {
            rep.max_constraint = lhs;
            rep.witness_price = p;
        }
    }
    rep.constraint_holds = rep.max_constraint <= bound + 1e-6;

    for (std::size_t j = 1; j <= options.price_points; ++j) {
        const double p = std::pow(100.0 * bound, static_cast<double>(j) / points);
        double prod = 1.0;
        for (std::size_t i = 0; i < n; ++i) prod *= 1.0 - std::clamp(mean_demand(atoms[i], p * revenue_scale), 0.0, 1.0);
        rep.max_linear_normalised = std::max(rep.max_linear_normalised, p * (1.0 - prod));
    }

    for (double r : solution.shares) rep.share_sum += r;
    rep.shares_hold = rep.share_sum <= 1.0 + 1e-9;

    // E[y*_i(p)] >= (1 - F_{i,0}(2 kappa p)) / (2 kappa - 1)
    rep.demand_min_margin = kInfinity;
    for (std::size_t i = 0; i < n; ++i) {
        const double top = solution.at_zero[i].values().back();
        for (std::size_t j = 1; j <= options.price_points; ++j) {
            const double p = 1.25 * top / (2.0 * kappa) * static_cast<double>(j) / points;
            const double lhs = mean_demand(atoms[i], p);
            const double rhs = (1.0 - solution.at_zero[i].cdf(2.0 * kappa * p)) / bound;
            if (lhs - rhs < rep.demand_min_margin) {
                rep.demand_min_margin = lhs - rhs;
                rep.demand_witness_agent = i;
                rep.demand_witness_price = p;
            }
        }
    }
    rep.demand_holds = rep.demand_min_margin >= -1e-12;

    const ProductLemmaResult product = product_lemma_check(options.product_trials, options.seed);
    rep.product_min_margin = product.min_margin;
    rep.product_trials = product.trials;
    rep.product_holds = product.holds;
    return rep;
}

// ---------------------------------------------------------------- lower bound

LowerBoundInstance lower_bound_instance(double kappa, const PriceGridSpec& grid) {
    if (!(kappa > 1.0)) throw DomainError("lower_bound_instance: kappa must be > 1");
    LowerBoundInstance out;
    out.valuation = ConcaveValuation::log_cap(kappa);
    const auto& rep = std::get<LogCap>(out.valuation.representation());
    out.kappa = kappa;
    out.rho = rep.rho;
    out.plateau = 1.0 / rep.rho;
    out.nonlinear_revenue = out.valuation.value(1.0);

    const std::vector<ValuationDistribution> dists{ValuationDistribution::point_mass(out.valuation)};
    PriceGridSpec spec = grid;
    spec.price_cap = std::max(spec.price_cap, kappa);
    const BestLinearRevenue best = best_linear_revenue(dists, spec, 1, 0, Exec::Serial);
    out.linear_revenue = best.revenue;
    out.best_price = best.price;
    out.curve = best.curve;
    out.gap = out.nonlinear_revenue / out.linear_revenue;
    out.plateau_matches = std::abs(out.linear_revenue - out.plateau) <= 1e-6;
    out.gap_holds = out.gap >= out.rho - 1e-6 && out.rho >= 1.0 + std::log(kappa) - 1e-6;
    return out;
}

}  // namespace divprice
