#pragma once

// Reference computations that share no code with the library: direct grid
// search, exhaustive enumeration and textbook root finding. Tests compare the
// library against these.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace oracle {

/// Bisection for a sign change of f on [lo, hi].
inline double bisect(const std::function<double(double)>& f, double lo, double hi, int iterations = 200) {
    double flo = f(lo);
    for (int it = 0; it < iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        const double fm = f(mid);
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// beta with e^{1/beta} = 2 + 1/beta, via Newton on s = 1/beta.
inline double beta_newton() {
    double s = 1.0;
    for (int it = 0; it < 100; ++it) s -= (std::exp(s) - 2.0 - s) / (std::exp(s) - 1.0);
    return 1.0 / s;
}

/// rho - ln rho = 1 + ln kappa, rho > 1, via Newton from a safe start.
inline double log_cap_rho_newton(double kappa) {
    const double target = 1.0 + std::log(kappa);
    double rho = std::max(2.0, 2.0 * target);
    for (int it = 0; it < 200; ++it) rho -= (rho - std::log(rho) - target) / (1.0 - 1.0 / rho);
    return rho;
}

/// Max of sum_i v_i(x_i) over x on the simplex sum x = 1 by grid search with
/// step h. Two agents: exhaustive. Three agents: exhaustive on a coarse grid,
/// then exhaustive with step h around the coarse optimum (the objective is
/// concave, so the local search finds the global grid optimum neighbourhood).
inline double brute_force_welfare(const std::vector<std::function<double(double)>>& v, double h) {
    const std::size_t n = v.size();
    if (n == 1) return v[0](1.0);
    if (n == 2) {
        const auto steps = static_cast<long>(std::llround(1.0 / h));
        double best = -1e300;
        for (long k = 0; k <= steps; ++k) {
            const double x = std::min(1.0, static_cast<double>(k) * h);
            best = std::max(best, v[0](x) + v[1](1.0 - x));
        }
        return best;
    }
    auto eval = [&](double a, double b) {
        const double c = std::max(0.0, 1.0 - a - b);
        return v[0](a) + v[1](b) + v[2](c);
    };
    double best = -1e300, ba = 0.0, bb = 0.0;
    const double coarse = 0.01;
    for (int i = 0; i <= 100; ++i) {
        for (int j = 0; i + j <= 100; ++j) {
            const double a = i * coarse, b = j * coarse;
            const double f = eval(a, std::min(b, 1.0 - a));
            if (f > best) {
                best = f;
                ba = a;
                bb = b;
            }
        }
    }
    const double radius = 2.0 * coarse;
    const auto steps = static_cast<long>(std::llround(2.0 * radius / h));
    for (long i = 0; i <= steps; ++i) {
        const double a = ba - radius + static_cast<double>(i) * h;
        if (a < 0.0 || a > 1.0) continue;
        for (long j = 0; j <= steps; ++j) {
            const double b = bb - radius + static_cast<double>(j) * h;
            if (b < 0.0 || a + b > 1.0 + 1e-12) continue;
            best = std::max(best, eval(a, std::min(b, 1.0 - a)));
        }
    }
    return best;
}

/// E[min{cap, sum X_i}] for independent finite discrete X_i, enumerating the
/// product space with an odometer.
inline double expected_min(const std::vector<std::vector<std::pair<double, double>>>& vars, double cap = 1.0) {
    const std::size_t k = vars.size();
    std::vector<std::size_t> idx(k, 0);
    double total = 0.0;
    while (true) {
        double prob = 1.0, sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            sum += vars[i][idx[i]].first;
            prob *= vars[i][idx[i]].second;
        }
        total += prob * std::min(cap, sum);
        std::size_t i = 0;
        while (i < k && ++idx[i] == vars[i].size()) idx[i++] = 0;
        if (i == k) break;
    }
    return total;
}

}  // namespace oracle
