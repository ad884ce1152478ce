// Serial reference loop vs OpenMP loop for the per-sample kernels.
//
//   bench_kernels [samples] [agents]
//
// Reports the best of five timings per kernel and checks that both paths
// produce identical results.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "divprice/calibration.hpp"
#include "divprice/kernels.hpp"
#include "divprice/mechanism.hpp"
#include "divprice/welfare.hpp"

using namespace divprice;

namespace {

template <class F>
double best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto start = std::chrono::steady_clock::now();
        f();
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
        if (dt.count() < best) best = dt.count();
    }
    return best;
}

void report(const char* name, double serial, double parallel, bool same) {
    std::printf("%-22s serial %9.4f s   parallel %9.4f s   speedup %5.2fx   %s\n", name, serial, parallel,
                serial / parallel, same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    const std::size_t samples = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 100000;
    const std::size_t agents = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 6;
    std::printf("samples %zu, agents %zu, threads %d\n", samples, agents, kernels::max_threads());

    std::vector<ValuationDistribution> dists;
    for (std::size_t i = 0; i < agents; ++i) {
        const double c = 0.3 + 0.1 * static_cast<double>(i % 6);
        dists.push_back(ValuationDistribution::scaled_uniform(ConcaveValuation::power(1.0, c), 0.5, 1.5));
    }
    const Ordering random = Ordering::uniform_random();
    const std::uint64_t seed = 2024;
    const double price = 0.8;
    const int reps = 5;
    bool all_same = true;

    SampleBatch bs, bp;
    const double t_draw_s = best_of(reps, [&] { bs = kernels::draw_samples(dists, random, samples, seed, Exec::Serial); });
    const double t_draw_p =
        best_of(reps, [&] { bp = kernels::draw_samples(dists, random, samples, seed, Exec::Parallel); });
    bool same = bs.orders == bp.orders;
    for (std::size_t s = 0; same && s < bs.size(); ++s) {
        for (std::size_t i = 0; i < agents; ++i) same = same && bs.profiles[s][i].scale() == bp.profiles[s][i].scale();
    }
    report("draw_samples", t_draw_s, t_draw_p, same);
    all_same = all_same && same;

    std::vector<double> fs, fp;
    const double t_sold_s = best_of(reps, [&] { fs = kernels::sold_fractions(bs, price, Exec::Serial); });
    const double t_sold_p = best_of(reps, [&] { fp = kernels::sold_fractions(bs, price, Exec::Parallel); });
    report("sold_fractions", t_sold_s, t_sold_p, fs == fp);
    all_same = all_same && fs == fp;

    std::vector<MechanismOutcome> os, op;
    const double t_sim_s = best_of(reps, [&] { os = kernels::simulate(bs, price, Exec::Serial); });
    const double t_sim_p = best_of(reps, [&] { op = kernels::simulate(bs, price, Exec::Parallel); });
    same = os.size() == op.size();
    for (std::size_t s = 0; same && s < os.size(); ++s) same = os[s].fractions == op[s].fractions;
    report("simulate", t_sim_s, t_sim_p, same);
    all_same = all_same && same;

    std::vector<OptimalAllocation> as, ap;
    const double t_opt_s = best_of(reps, [&] { as = kernels::optimal_allocations(bs, Exec::Serial); });
    const double t_opt_p = best_of(reps, [&] { ap = kernels::optimal_allocations(bs, Exec::Parallel); });
    same = as.size() == ap.size();
    for (std::size_t s = 0; same && s < as.size(); ++s) same = as[s].fractions == ap[s].fractions;
    report("optimal_allocations", t_opt_s, t_opt_p, same);
    all_same = all_same && same;

    const double target = solve_constants().rho1;
    CalibrationOptions serial_opts;
    serial_opts.exec = Exec::Serial;
    CalibrationOptions parallel_opts;
    const double pmax = calibration_price_max(dists, serial_opts.price_cap);
    PriceCalibration cs, cp;
    const double t_cal_s = best_of(1, [&] { cs = calibrate(bs, target, pmax, serial_opts); });
    const double t_cal_p = best_of(1, [&] { cp = calibrate(bs, target, pmax, parallel_opts); });
    report("calibrate", t_cal_s, t_cal_p, cs.price == cp.price);
    all_same = all_same && cs.price == cp.price;

    return all_same ? 0 : 1;
}
