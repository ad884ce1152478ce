#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "divprice/errors.hpp"
#include "divprice/experiment.hpp"
#include "oracles.hpp"

using namespace divprice;
using doctest::Approx;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kTmp{DIVPRICE_TEST_TMP};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path write_config(const std::string& name, const json& doc) {
    fs::create_directories(kTmp);
    const fs::path p = kTmp / name;
    std::ofstream(p) << doc.dump(2);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DIVPRICE_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1 || !WIFEXITED(status)) return -1;
    return WEXITSTATUS(status);
}

std::string config_error(const json& doc) {
    try {
        parse_config(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

std::vector<std::vector<double>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    CHECK(line == "x,y,stderr");
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(row);
    }
    return rows;
}

const json kSmooth = json::parse(R"({
  "task": "welfare-ratio", "seed": 11, "samples": 4000, "target": "rho1",
  "instance": {"agents": [
    {"kind": "scaled", "base": {"kind": "power", "a": 1, "c": 0.5}, "uniform": {"lo": 0.5, "hi": 1.5}},
    {"kind": "scaled", "base": {"kind": "linear", "a": 1}, "uniform": {"lo": 0.2, "hi": 2}}
  ]}
})");

}  // namespace

TEST_CASE("config errors name the field") {
    json unknown = kSmooth;
    unknown["instance"]["agents"][1]["base"]["slope"] = 2;
    const std::string e1 = config_error(unknown);
    CHECK(e1.find("instance.agents[1].base") != std::string::npos);
    CHECK(e1.find("slope") != std::string::npos);

    json negative = kSmooth;
    negative["samples"] = -5;
    CHECK(config_error(negative).find("samples") != std::string::npos);

    json bad_target = kSmooth;
    bad_target["target"] = 1.5;
    CHECK(config_error(bad_target).find("target") != std::string::npos);

    json bad_a = kSmooth;
    bad_a["instance"]["agents"][0]["base"]["a"] = -1;
    CHECK(config_error(bad_a).find("instance.agents[0].base.a") != std::string::npos);

    json top = kSmooth;
    top["sampels"] = 10;
    CHECK(config_error(top).find("sampels") != std::string::npos);

    json signed_count = kSmooth;
    signed_count["samples"] = json(static_cast<std::int64_t>(250));
    CHECK(parse_config(signed_count).samples == 250);

    CHECK_THROWS_AS(parse_config(kSmooth, Task::Calibrate), ConfigError);
    CHECK(parse_config(kSmooth).agents.size() == 2);
}

TEST_CASE("invalid config: exit 2 and no output directory") {
    json negative = kSmooth;
    negative["samples"] = -5;
    const fs::path cfg = write_config("negative.json", negative);
    const fs::path out = kTmp / "negative_out";
    fs::remove_all(out);
    CHECK(run_cli("welfare-ratio --config " + cfg.string() + " --out " + out.string()) == 2);
    CHECK_FALSE(fs::exists(out));
    CHECK(run_cli("welfare-ratio --config " + (kTmp / "missing.json").string() + " --out " + out.string()) == 2);
    CHECK_FALSE(fs::exists(out));
    CHECK(run_cli("no-such-task --config " + cfg.string()) == 2);
}

TEST_CASE("emit_curve") {
    const std::vector<CurvePoint> pts{{0.5, 1.0, 0.0}};
    CHECK(format_curve(pts) == "x,y,stderr\n0.5,1,0\n");
    fs::create_directories(kTmp);
    emit_curve(pts, kTmp / "one.csv");
    CHECK(slurp(kTmp / "one.csv") == "x,y,stderr\n0.5,1,0\n");
    CHECK_THROWS_AS(emit_curve(std::vector<CurvePoint>{}, kTmp / "empty.csv"), DomainError);
    CHECK_THROWS_AS(emit_curve(pts, kTmp / "no_such_dir" / "x.csv"), std::runtime_error);
}

TEST_CASE("make_check relations") {
    CHECK(make_check("a", 1.0, ">=", 0.5, 0.0).passed);
    CHECK_FALSE(make_check("a", 0.4, ">=", 0.5, 0.05).passed);
    CHECK(make_check("a", 0.46, ">=", 0.5, 0.05).passed);
    CHECK(make_check("b", 0.4, "<=", 0.5, 0.0).margin == Approx(0.1));
    CHECK(make_check("c", 1.0, "==", 1.0 + 1e-13, 1e-12).passed);
    CHECK_FALSE(make_check("c", 1.0, "==", 1.1, 1e-12).passed);
    Report r;
    r.checks.push_back(make_check("x", 0.0, ">=", 1.0, 0.0, false));
    CHECK(r.passed());
    CHECK(exit_code(r) == 0);
    r.checks.push_back(make_check("y", 0.0, ">=", 1.0, 0.0));
    CHECK(r.failed_checks() == 1);
    CHECK(exit_code(r) == 1);
}

TEST_CASE("report round trip") {
    ExperimentConfig cfg = parse_config(kSmooth);
    override_samples(cfg, 500);
    const ExperimentResult res = run_experiment(cfg);
    const json doc = res.report.to_json();
    const Report back = Report::from_json(doc);
    CHECK(back.to_json() == doc);
    CHECK(back.task == "welfare-ratio");
    CHECK(back.samples == 500);
    CHECK(back.config.at("samples") == 500);
    CHECK(back.checks.size() == res.report.checks.size());
    CHECK(doc.at("tool") == "divprice");
    CHECK(doc.at("version") == std::string(kToolVersion));
}

TEST_CASE("runs are byte-identical for a fixed seed") {
    const fs::path cfg = write_config("smooth.json", kSmooth);
    const fs::path a = kTmp / "det_a";
    const fs::path b = kTmp / "det_b";
    fs::remove_all(a);
    fs::remove_all(b);
    REQUIRE(run_cli("welfare-ratio --config " + cfg.string() + " --out " + a.string()) == 0);
    REQUIRE(run_cli("welfare-ratio --config " + cfg.string() + " --out " + b.string()) == 0);
    for (const auto& entry : fs::directory_iterator(a)) {
        const std::string name = entry.path().filename().string();
        if (name == "run_info.json") continue;
        CAPTURE(name);
        CHECK(slurp(entry.path()) == slurp(b / name));
    }
    CHECK(fs::exists(a / "report.json"));
    CHECK(fs::exists(a / "curve_sold_fraction.csv"));

    // a different seed changes the estimates
    const fs::path c = kTmp / "det_c";
    fs::remove_all(c);
    REQUIRE(run_cli("welfare-ratio --config " + cfg.string() + " --seed 12 --out " + c.string()) == 0);
    CHECK(slurp(a / "report.json") != slurp(c / "report.json"));
    CHECK(json::parse(slurp(c / "report.json")).at("seed") == 12);
}

TEST_CASE("lower bound at kappa = e") {
    const fs::path cfg = write_config("lb.json", json{{"task", "lower-bound"}, {"kappa", std::numbers::e}});
    const fs::path out = kTmp / "lb_out";
    fs::remove_all(out);
    CHECK(run_cli("lower-bound --config " + cfg.string() + " --out " + out.string()) == 0);
    const json rep = json::parse(slurp(out / "report.json"));
    CHECK(rep.at("values").at("gap").get<double>() >= 2.0);
    const double rho = oracle::log_cap_rho_newton(std::numbers::e);
    CHECK(rep.at("values").at("rho").get<double>() == Approx(rho).epsilon(1e-12));

    // the revenue curve rises linearly and then stays on the plateau 1/rho
    const auto rows = read_csv(out / "curve_revenue.csv");
    REQUIRE(rows.size() >= 64);
    double best = 0.0;
    for (const auto& r : rows) best = std::max(best, r[1]);
    CHECK(best == Approx(1.0 / rho).epsilon(1e-9));
    for (const auto& r : rows) CHECK(r[1] <= 1.0 / rho + 1e-12);
}

TEST_CASE("calibrate on a point-mass linear valuation flags the unreachable target") {
    const json doc = json::parse(R"({"task": "calibrate", "samples": 100,
                                     "instance": {"agents": [{"kind": "linear", "a": 1}]}})");
    const fs::path cfg = write_config("cal_linear.json", doc);
    const fs::path out = kTmp / "cal_linear_out";
    fs::remove_all(out);
    CHECK(run_cli("calibrate --config " + cfg.string() + " --out " + out.string()) == 0);
    const json rep = json::parse(slurp(out / "report.json"));
    CHECK(rep.at("flags").at("target_unreachable") == true);
    CHECK_FALSE(rep.at("warnings").empty());
}

TEST_CASE("sold fraction curve of a smooth instance is nonincreasing") {
    json doc = kSmooth;
    doc["task"] = "calibrate";
    ExperimentConfig cfg = parse_config(doc);
    override_samples(cfg, 3000);
    const ExperimentResult res = run_experiment(cfg);
    REQUIRE(res.curves.size() == 1);
    const auto& pts = res.curves[0].points;
    REQUIRE(pts.size() == cfg.curve_points);
    CHECK(pts.front().y == Approx(1.0));
    for (std::size_t k = 1; k < pts.size(); ++k) CHECK(pts[k].y <= pts[k - 1].y);
    CHECK(res.report.flags.at("calibrated"));
    CHECK(res.report.passed());
}

TEST_CASE("every task runs from a config") {
    const std::vector<json> docs{
        json::parse(R"({"task": "revenue-gap", "grid": 64,
            "instance": {"agents": [{"kind": "linear", "a": 1}, {"kind": "linear", "a": 3}]}})"),
        json::parse(R"({"task": "verify-lemmas", "samples": 2000, "min_lemma_instances": 50, "product_trials": 100,
            "instance": {"n": 2, "iid": {"kind": "scaled", "base": {"kind": "power", "a": 1, "c": 0.6},
                                          "uniform": {"lo": 0.5, "hi": 1.5}}}})"),
        json::parse(R"({"task": "welfare-ratio", "samples": 2000, "target": "rho2",
            "instance": {"n": 3, "iid": {"kind": "scaled", "base": {"kind": "power", "a": 1, "c": 0.5},
                                          "uniform": {"lo": 0.5, "hi": 1.5}}}})")};
    for (const auto& doc : docs) {
        CAPTURE(doc.dump());
        const ExperimentResult res = run_experiment(parse_config(doc));
        CHECK(res.report.passed());
        CHECK_FALSE(res.report.checks.empty());
    }
    const ExperimentResult gap = run_experiment(parse_config(docs[0]));
    CHECK(gap.report.values.at("gap") == Approx(1.0));
    CHECK(gap.report.values.at("upper_bound") == Approx(3.0));
}
