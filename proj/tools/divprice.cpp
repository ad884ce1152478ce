// Command-line front end: one config file in, one report directory out.
//
//   divprice <task> --config exp.json [--out dir] [--seed n] [--samples n]
//
// Exit status: 0 all asserted checks passed, 1 an assertion failed,
// 2 usage, configuration or runtime error (nothing is written).

#include <cstdint>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "divprice/errors.hpp"
#include "divprice/experiment.hpp"

namespace {

struct Args {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples;
};

void print_summary(const divprice::Report& rep, const std::string& dir) {
    std::size_t asserted = 0;
    for (const auto& c : rep.checks) asserted += c.asserted ? 1 : 0;
    std::printf("%s: %zu/%zu asserted checks passed -> %s/report.json\n", rep.task.c_str(),
                asserted - rep.failed_checks(), asserted, dir.c_str());
    for (const auto& c : rep.checks) {
        if (c.asserted && !c.passed) {
            std::printf("  FAIL %s: %.12g %s %.12g (margin %.3g, tolerance %.3g)\n", c.name.c_str(), c.value,
                        c.relation.c_str(), c.bound, c.margin, c.tolerance);
        }
    }
    for (const auto& w : rep.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

int run(divprice::Task task, const Args& args) {
    divprice::ExperimentConfig config = divprice::load_config(args.config, task);
    if (args.seed) divprice::override_seed(config, *args.seed);
    if (args.samples) divprice::override_samples(config, *args.samples);
    const std::string dir = args.out.empty() ? config.output_dir : args.out;

    const divprice::ExperimentResult result = divprice::run_experiment(config);
    divprice::write_outputs(result, dir);
    print_summary(result.report, dir);
    return divprice::exit_code(result.report);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Linear posted pricing of a divisible good: welfare and revenue experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(divprice::kToolVersion));

    Args args;
    std::optional<divprice::Task> chosen;
    for (divprice::Task task : {divprice::Task::Calibrate, divprice::Task::WelfareRatio,
                                divprice::Task::RevenueGap, divprice::Task::LowerBound,
                                divprice::Task::VerifyLemmas}) {
        const std::string name(divprice::task_name(task));
        CLI::App* sub = app.add_subcommand(name, "Run a " + name + " experiment");
        sub->add_option("--config", args.config, "Experiment configuration (JSON)")->required();
        sub->add_option("--out", args.out, "Output directory (overrides output.dir)");
        sub->add_option("--seed", args.seed, "Seed (overrides the config)");
        sub->add_option("--samples", args.samples, "Monte Carlo samples (overrides the config)")
            ->check(CLI::PositiveNumber);
        sub->callback([&chosen, task] { chosen = task; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        return run(*chosen, args);
    } catch (const divprice::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
    }
    return 2;
}
