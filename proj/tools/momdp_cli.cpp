// Command-line driver: model validation, structural analysis, algorithm runs,
// and tester calibration sweeps. All commands are pure functions of their
// inputs and seeds; repeated invocations produce byte-identical outputs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "momdp/harness.hpp"

using namespace momdp;

namespace {

int cmd_validate(const std::string& spec_path) {
    TabularPOMDP model;
    try {
        model = load_spec(spec_path);
    } catch (const std::exception& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    }
    const auto violations = validate(model);
    if (violations.empty()) {
        std::cout << "ok: " << spec_path << " is a valid momdp-spec/1 model\n";
        return 0;
    }
    for (const auto& v : violations) std::cout << "violation: " << v << "\n";
    return 1;
}

int cmd_analyze(const std::string& spec_path, int k_max, const std::string& method,
                const std::string& out_path, const std::string& format) {
    const auto model = load_spec(spec_path);
    const auto violations = validate(model);
    if (!violations.empty()) {
        std::cerr << "invalid model: " << violations.front() << "\n";
        return 1;
    }
    const auto m = method == "lp" ? spectral::CertMethod::lp_exact
                                  : spectral::CertMethod::pseudo_inverse;
    const auto report = harness::analyze_model(model, k_max, m);
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << report.dump(2) << "\n";
    }
    if (format == "json") {
        std::cout << report.dump(2) << "\n";
    } else {
        std::cout << harness::render_analysis_text(report);
    }
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_override,
            const std::vector<std::uint64_t>& seed_override) {
    auto cfg = harness::load_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (!seed_override.empty()) cfg.seeds = seed_override;
    const auto summary = harness::run_experiment(cfg);
    std::cout << "experiment " << summary.id << ": " << summary.seeds_completed
              << " seeds completed, " << summary.seeds_failed << " failed\n";
    for (const auto& d : summary.diagnostics) std::cerr << "  " << d << "\n";
    return summary.seeds_failed == 0 ? 0 : 1;
}

int cmd_calibrate(const std::string& grid_path, int trials, std::uint64_t seed,
                  const std::string& out_path) {
    std::ifstream in(grid_path);
    if (!in) {
        std::cerr << "cannot open grid file: " << grid_path << "\n";
        return 2;
    }
    nlohmann::json grid_json;
    in >> grid_json;
    const auto cells = harness::parse_grid(grid_json);
    const int n = trials > 0 ? trials : grid_json.value("trials", 1000);
    const auto report = harness::calibrate(cells, n, seed);

    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << report.dump(2) << "\n";
    }
    if (const char* cache = std::getenv("MOMDP_CACHE_DIR")) {
        std::filesystem::create_directories(cache);
        std::ofstream out(std::string(cache) + "/calibration.json");
        out << report.dump(2) << "\n";
    }
    std::cout << "pinned C1 = " << report["C1"].get<double>() << "\n";
    for (const auto& cell : report["cells"]) {
        std::cout << "  O=" << cell["O"] << " alpha=" << cell["alpha"] << " delta=" << cell["delta"]
                  << " recommended_k=" << cell["recommended_k"] << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"momdp: k-observation POMDP laboratory"};
    app.require_subcommand(1);

    std::string spec_path, config_path, grid_path, out_path, method = "pinv", format = "text";
    int k_max = 3, trials = 0;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> seeds;

    auto* validate_cmd = app.add_subcommand("validate", "check a momdp-spec/1 file");
    validate_cmd->add_option("--spec", spec_path, "model spec file")->required();

    auto* analyze_cmd =
        app.add_subcommand("analyze", "distinguishability and revealing-rank report");
    analyze_cmd->add_option("--spec", spec_path, "model spec file")->required();
    analyze_cmd->add_option("--k", k_max, "largest tensor order to analyze");
    analyze_cmd->add_option("--method", method, "certificate method: pinv | lp");
    analyze_cmd->add_option("--out", out_path, "write the JSON report here");
    analyze_cmd->add_option("--format", format, "stdout rendering: text | json");

    auto* run_cmd = app.add_subcommand("run", "execute a configured experiment");
    run_cmd->add_option("--config", config_path, "momdp-config/1 file")->required();
    run_cmd->add_option("--out", out_path, "override the output directory");
    run_cmd->add_option("--seed", seeds, "override the seed list");

    auto* calibrate_cmd =
        app.add_subcommand("calibrate", "Monte Carlo tester calibration sweep");
    calibrate_cmd->add_option("--grid", grid_path, "momdp-grid/1 file")->required();
    calibrate_cmd->add_option("--trials", trials, "Monte Carlo trials per cell");
    calibrate_cmd->add_option("--seed", seed, "sweep seed");
    calibrate_cmd->add_option("--out", out_path, "write the calibration report here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate_cmd->parsed()) return cmd_validate(spec_path);
        if (analyze_cmd->parsed()) return cmd_analyze(spec_path, k_max, method, out_path, format);
        if (run_cmd->parsed()) return cmd_run(config_path, out_path, seeds);
        if (calibrate_cmd->parsed()) return cmd_calibrate(grid_path, trials, seed, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
