#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "divprice/calibration.hpp"
#include "divprice/estimate.hpp"
#include "divprice/kernels.hpp"
#include "divprice/revenue.hpp"
#include "divprice/valuation.hpp"

namespace divprice {

inline constexpr std::string_view kToolName = "divprice";
inline constexpr std::string_view kToolVersion = "1.0.0";

enum class Task { Calibrate, WelfareRatio, RevenueGap, LowerBound, VerifyLemmas };

std::string_view task_name(Task task);
std::optional<Task> parse_task(std::string_view name);

struct TargetSpec {
    enum class Kind { Rho1, Rho2, Custom };
    Kind kind = Kind::Rho1;
    double custom = 0.0;

    double value() const;
    std::string label() const;
};

/// "identity", "reverse", "random" (fresh uniform order per run),
/// "random_fixed" (one seeded permutation, drawn once) or an explicit
/// 0-based permutation.
struct OrderingSpec {
    std::string kind = "identity";
    std::vector<std::size_t> permutation;
};

struct ExperimentConfig {
    Task task = Task::Calibrate;
    std::vector<ValuationDistribution> agents;
    TargetSpec target;
    std::vector<OrderingSpec> orderings;
    std::size_t samples = 100'000;
    std::uint64_t seed = 1;
    double tolerance = 1e-3;
    double price_cap = 1e3;
    std::optional<double> price;
    std::size_t grid = 256;
    PriceGridSpec price_grid;
    std::vector<double> kappas;
    bool feasibility = true;
    std::size_t curve_points = 65;
    std::vector<double> alphas{0.25, 0.5, 0.75, 1.0};
    std::size_t min_lemma_instances = 1000;
    std::size_t product_trials = 10'000;
    double sigmas = 3.0;
    Exec exec = Exec::Parallel;
    std::string output_dir = "out";

    /// The document the config was parsed from, with command-line overrides
    /// applied; echoed in the report.
    nlohmann::json source;
};

/// Parses and validates a configuration document. Unknown keys and
/// out-of-range values raise ConfigError naming the offending field.
/// `expected` rejects a document whose task differs from the subcommand, and
/// supplies the task when the document omits it.
ExperimentConfig parse_config(const nlohmann::json& doc, std::optional<Task> expected = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path, std::optional<Task> expected = std::nullopt);

/// Overrides used by the command line; keep `source` in sync.
void override_seed(ExperimentConfig& config, std::uint64_t seed);
void override_samples(ExperimentConfig& config, std::size_t samples);

/// One inequality decision. The check passes iff margin >= -tolerance, where
/// margin is value - bound for ">=", bound - value for "<=", and
/// -|value - bound| for "==". Unasserted checks are informative only.
struct Check {
    std::string name;
    std::string relation = ">=";
    double value = 0.0;
    double bound = 0.0;
    double margin = 0.0;
    double tolerance = 0.0;
    bool asserted = true;
    bool passed = true;
};

Check make_check(std::string name, double value, std::string relation, double bound, double tolerance,
                 bool asserted = true);

struct Report {
    std::string tool{kToolName};
    std::string version{kToolVersion};
    std::string task;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::size_t samples = 0;
    std::map<std::string, Estimate> estimates;
    std::map<std::string, double> values;
    std::map<std::string, bool> flags;
    std::vector<Check> checks;
    std::vector<std::string> warnings;
    std::vector<std::string> curves;  // file names written next to the report
    /// Not serialised into the report, which must be byte-identical across
    /// reruns; written to run_info.json instead.
    double wall_clock_seconds = 0.0;

    bool passed() const;
    std::size_t failed_checks() const;
    nlohmann::json to_json() const;
    static Report from_json(const nlohmann::json& doc);
};

struct NamedCurve {
    std::string file;  // e.g. curve_revenue.csv
    std::vector<CurvePoint> points;
};

struct ExperimentResult {
    Report report;
    std::vector<NamedCurve> curves;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

/// CSV text with header `x,y,stderr` and 12 significant digits per value.
std::string format_curve(std::span<const CurvePoint> series);
/// Writes format_curve(series) to `path`; throws std::runtime_error naming the
/// path on I/O failure and DomainError on an empty series.
void emit_curve(std::span<const CurvePoint> series, const std::filesystem::path& path);

/// report.json, every curve, and run_info.json (wall-clock time).
void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

/// 0 when every asserted check passed, 1 otherwise.
int exit_code(const Report& report);

}  // namespace divprice
