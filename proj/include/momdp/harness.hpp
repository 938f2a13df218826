#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "momdp/dist_testing.hpp"
#include "momdp/envs.hpp"
#include "momdp/komle.hpp"
#include "momdp/ost.hpp"
#include "momdp/results.hpp"
#include "momdp/spectral.hpp"

namespace momdp::harness {

// ---- environment references -----------------------------------------------------

// An environment is given either as a recipe or as an inline momdp-spec/1
// model (or a path to one on disk).
inline TabularPOMDP load_env(const nlohmann::json& j) {
    if (j.contains("recipe")) return envs::build(j["recipe"].get<envs::EnvRecipe>());
    if (j.contains("spec")) return from_spec_json(j["spec"]);
    if (j.contains("spec_file")) return load_spec(j["spec_file"].get<std::string>());
    throw std::invalid_argument("environment needs one of: recipe, spec, spec_file");
}

// ---- experiment configuration ----------------------------------------------------

inline constexpr const char* kConfigFormat = "momdp-config/1";

struct ExperimentConfig {
    std::string id = "experiment";
    std::string algorithm;  // "ost" | "komle"
    nlohmann::json env;
    std::vector<std::uint64_t> seeds;
    std::string out_dir = ".";

    int T = 100;
    int k = 1;
    double delta = 0.1;

    // ost
    double beta1 = -1.0;  // -1 = Thm-form default
    double beta2 = -1.0;
    double c1_bonus = 1.0;
    double c2_bonus = 1.0;
    int rep_cap = 25;
    int test_blocks = 0;
    double test_delta = 0.0;

    // komle
    nlohmann::json candidates;  // array of env references
    int truth_index = -1;
    double beta = -1.0;             // -1 = log(|Theta| T / delta)
    long long episode_budget = -1;  // cap on episodes; -1 = T full iterations
};

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    if (!j.contains("format") || j["format"] != kConfigFormat) {
        throw std::invalid_argument("config file missing header \"format\": \"momdp-config/1\"");
    }
    ExperimentConfig c;
    c.id = j.value("id", std::string("experiment"));
    if (!j.contains("algorithm")) throw std::invalid_argument("config: missing \"algorithm\"");
    c.algorithm = j["algorithm"].get<std::string>();
    if (c.algorithm != "ost" && c.algorithm != "komle") {
        throw std::invalid_argument("config: unknown algorithm \"" + c.algorithm +
                                    "\" (expected \"ost\" or \"komle\")");
    }
    if (!j.contains("env")) throw std::invalid_argument("config: missing \"env\"");
    c.env = j["env"];
    c.seeds = j.value("seeds", std::vector<std::uint64_t>{});
    if (c.seeds.empty()) throw std::invalid_argument("config: needs a nonempty \"seeds\" list");
    c.out_dir = j.value("out_dir", std::string("."));
    c.T = j.value("T", 100);
    c.k = j.value("k", 1);
    c.delta = j.value("delta", 0.1);
    c.beta1 = j.value("beta1", -1.0);
    c.beta2 = j.value("beta2", -1.0);
    c.c1_bonus = j.value("c1_bonus", 1.0);
    c.c2_bonus = j.value("c2_bonus", 1.0);
    c.rep_cap = j.value("rep_cap", 25);
    c.test_blocks = j.value("test_blocks", 0);
    c.test_delta = j.value("test_delta", 0.0);
    if (j.contains("candidates")) c.candidates = j["candidates"];
    c.truth_index = j.value("truth_index", -1);
    c.beta = j.value("beta", -1.0);
    c.episode_budget = j.value("episode_budget", -1LL);
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j;
    in >> j;
    return parse_config(j);
}

// ---- runners ----------------------------------------------------------------------

struct RegretRow {
    std::uint64_t seed;
    int iteration;
    double inst_regret;
    double cum_regret;
};

struct ValueRow {
    std::uint64_t seed;
    int iteration;
    double optimistic_value;
    double oracle_value;
    int confset_size;
};

struct RunSummary {
    std::string id;
    int seeds_completed = 0;
    int seeds_failed = 0;
    std::vector<std::string> diagnostics;
    std::vector<results::ResultRow> rows;
    std::vector<nlohmann::json> log_lines;
    std::vector<RegretRow> regret_trace;
    std::vector<ValueRow> value_trace;
};

inline void run_ost_experiment(const ExperimentConfig& cfg, const TabularPOMDP& env,
                               std::uint64_t seed, RunSummary& summary) {
    ost::OstConfig oc;
    oc.T = cfg.T;
    oc.k = cfg.k;
    oc.delta = cfg.delta;
    oc.test_delta = cfg.test_delta;
    oc.test_blocks = cfg.test_blocks;
    oc.S_guess = env.S;
    oc.rep_cap = cfg.rep_cap;
    oc.beta1 = cfg.beta1 >= 0.0
                   ? cfg.beta1
                   : ost::beta1_default(env.H, env.O, env.S, env.A, cfg.T, cfg.delta, cfg.c1_bonus);
    oc.beta2 = cfg.beta2 >= 0.0
                   ? cfg.beta2
                   : ost::beta2_default(env.O, env.S, cfg.T, env.H, cfg.delta, cfg.c2_bonus);
    const auto res = ost::run_ost(env, oc, seed);

    long long samples = 0;
    for (const auto& log : res.logs) {
        samples += static_cast<long long>(env.H) * cfg.k;
        summary.rows.push_back({cfg.id, seed, log.t, samples, "value", log.value});
        summary.rows.push_back({cfg.id, seed, log.t, samples, "regret", log.regret});
        summary.rows.push_back(
            {cfg.id, seed, log.t, samples, "cum_regret", res.cum_regret[log.t - 1]});
        summary.log_lines.push_back({{"experiment", cfg.id},
                                     {"seed", seed},
                                     {"t", log.t},
                                     {"value", log.value},
                                     {"max_labels", log.max_labels},
                                     {"tests", log.tests},
                                     {"accepts", log.accepts},
                                     {"rejects", log.rejects},
                                     {"fails", log.fails},
                                     {"max_bonus_s", log.max_bonus_s},
                                     {"max_bonus_sa", log.max_bonus_sa}});
        summary.regret_trace.push_back({seed, log.t, log.regret, res.cum_regret[log.t - 1]});
    }
}

inline komle::ModelClass build_model_class(const ExperimentConfig& cfg) {
    komle::ModelClass mc;
    if (!cfg.candidates.is_array() || cfg.candidates.empty()) {
        throw std::invalid_argument("komle config: needs a nonempty \"candidates\" array");
    }
    for (const auto& ref : cfg.candidates) mc.models.push_back(load_env(ref));
    mc.truth_index = cfg.truth_index;
    mc.beta = cfg.beta >= 0.0 ? cfg.beta
                              : komle::beta_finite_class(mc.models.size(), cfg.T, cfg.delta);
    return mc;
}

inline void run_komle_experiment(const ExperimentConfig& cfg, const TabularPOMDP& env,
                                 const komle::ModelClass& mc, std::uint64_t seed,
                                 RunSummary& summary) {
    komle::KomleConfig kc;
    kc.T = cfg.T;
    kc.k = cfg.k;
    kc.episode_budget = cfg.episode_budget;
    const auto res = komle::run_komle(env, mc, kc, seed);
    long long samples = 0;
    for (const auto& row : res.trace) {
        samples += static_cast<long long>(env.H) * env.H * cfg.k;  // H episodes of kH each
        summary.rows.push_back({cfg.id, seed, row.t, samples, "value", row.oracle_value});
        summary.rows.push_back(
            {cfg.id, seed, row.t, samples, "optimistic_value", row.optimistic_value});
        summary.rows.push_back({cfg.id, seed, row.t, samples, "confset_size",
                                static_cast<double>(row.confset_size)});
        summary.log_lines.push_back({{"experiment", cfg.id},
                                     {"seed", seed},
                                     {"t", row.t},
                                     {"value", row.oracle_value},
                                     {"optimistic_value", row.optimistic_value},
                                     {"confset_size", row.confset_size},
                                     {"selected", row.selected},
                                     {"truth_retained", row.truth_retained}});
        summary.value_trace.push_back(
            {seed, row.t, row.optimistic_value, row.oracle_value, row.confset_size});
    }
}

// Runs every seed, writes <id>_results.csv and <id>_log.jsonl under out_dir.
// Completes remaining seeds even when one fails; the summary carries
// per-seed diagnostics.
inline RunSummary run_experiment(const ExperimentConfig& cfg) {
    RunSummary summary;
    summary.id = cfg.id;
    const auto env = load_env(cfg.env);
    validate_or_throw(env);
    std::optional<komle::ModelClass> mc;
    if (cfg.algorithm == "komle") mc = build_model_class(cfg);

    for (const auto seed : cfg.seeds) {
        try {
            if (cfg.algorithm == "ost") {
                run_ost_experiment(cfg, env, seed, summary);
            } else {
                run_komle_experiment(cfg, env, *mc, seed, summary);
            }
            ++summary.seeds_completed;
        } catch (const std::exception& e) {
            ++summary.seeds_failed;
            summary.diagnostics.push_back("seed " + std::to_string(seed) + ": " + e.what());
        }
    }

    std::filesystem::create_directories(cfg.out_dir);
    results::write_csv(summary.rows, cfg.out_dir + "/" + cfg.id + "_results.csv");
    results::write_jsonl(summary.log_lines, cfg.out_dir + "/" + cfg.id + "_log.jsonl");
    if (cfg.algorithm == "ost") {
        std::ofstream out(cfg.out_dir + "/" + cfg.id + "_regret.csv");
        out << "seed,iteration,inst_regret,cum_regret\n";
        for (const auto& r : summary.regret_trace) {
            out << r.seed << ',' << r.iteration << ',' << results::format_double(r.inst_regret)
                << ',' << results::format_double(r.cum_regret) << "\n";
        }
    } else {
        std::ofstream out(cfg.out_dir + "/" + cfg.id + "_values.csv");
        out << "seed,iteration,optimistic_value,oracle_value,confset_size\n";
        for (const auto& r : summary.value_trace) {
            out << r.seed << ',' << r.iteration << ',' << results::format_double(r.optimistic_value)
                << ',' << results::format_double(r.oracle_value) << ',' << r.confset_size << "\n";
        }
    }
    return summary;
}

// ---- analyze ------------------------------------------------------------------------

inline constexpr const char* kAnalysisFormat = "momdp-analysis/1";

// Structural-constant report: per-step distinguishability and, per (h, k), the
// numerical rank of the tensor-power emission with the revealing-certificate
// norm where one exists.
inline nlohmann::json analyze_model(const TabularPOMDP& m, int k_max,
                                    spectral::CertMethod method = spectral::CertMethod::pseudo_inverse,
                                    long long row_cap = spectral::kDefaultTensorRowCap) {
    nlohmann::json out;
    out["format"] = kAnalysisFormat;
    out["S"] = m.S;
    out["A"] = m.A;
    out["O"] = m.O;
    out["H"] = m.H;
    const auto rep = spectral::distinguishability(m);
    out["alpha"] = rep.alpha;
    nlohmann::json steps = nlohmann::json::array();
    for (int h = 0; h < m.H; ++h) {
        steps.push_back({{"h", h + 1},
                         {"alpha", rep.steps[h].alpha},
                         {"argmin_pair", {rep.steps[h].argmin_i, rep.steps[h].argmin_j}}});
    }
    out["distinguishability"] = std::move(steps);

    nlohmann::json table = nlohmann::json::array();
    for (int h = 0; h < m.H; ++h) {
        for (int k = 1; k <= k_max; ++k) {
            nlohmann::json row;
            row["h"] = h + 1;
            row["k"] = k;
            long long rows_needed = 1;
            bool oversize = false;
            for (int i = 0; i < k; ++i) {
                rows_needed *= m.O;
                if (rows_needed > row_cap) {
                    oversize = true;
                    break;
                }
            }
            if (oversize) {
                row["skipped"] = "O^k exceeds the row cap";
            } else {
                const auto cert = spectral::revealing_certificate(m, h, k, method, row_cap);
                row["rank"] = cert.numerical_rank;
                row["revealing"] = cert.ok;
                if (cert.ok) {
                    row["norm"] = cert.norm;
                    row["method"] = spectral::to_string(cert.method);
                }
            }
            table.push_back(std::move(row));
        }
    }
    out["revealing_table"] = std::move(table);
    return out;
}

inline std::string render_analysis_text(const nlohmann::json& a) {
    std::ostringstream os;
    os << "model: S=" << a["S"] << " A=" << a["A"] << " O=" << a["O"] << " H=" << a["H"] << "\n";
    os << "distinguishability alpha = " << a["alpha"].get<double>() << "\n";
    for (const auto& s : a["distinguishability"]) {
        os << "  h=" << s["h"] << "  alpha_h=" << s["alpha"].get<double>() << "\n";
    }
    os << "revealing table (h, k, rank, norm):\n";
    for (const auto& row : a["revealing_table"]) {
        os << "  h=" << row["h"] << " k=" << row["k"];
        if (row.contains("skipped")) {
            os << "  skipped: " << row["skipped"].get<std::string>() << "\n";
            continue;
        }
        os << "  rank=" << row["rank"];
        if (row["revealing"].get<bool>()) {
            os << "  norm=" << row["norm"].get<double>();
        } else {
            os << "  not revealing";
        }
        os << "\n";
    }
    return os.str();
}

// ---- calibrate -----------------------------------------------------------------------

inline constexpr const char* kGridFormat = "momdp-grid/1";
inline constexpr const char* kCalibrationFormat = "momdp-calibration/1";

struct GridCell {
    int O = 2;
    double alpha = 1.0;
    double delta = 0.1;
    std::vector<long long> k_grid;
};

// Monte Carlo error-rate sweep for both testers on the adversarial pair family
// (uniform vs half-shifted uniform at l1 distance alpha). Recommends the
// smallest k per cell with both error modes at or below delta, and pins
// C1 = max over cells of k_rec / (budget units * ln(1/delta)).
inline nlohmann::json calibrate(const std::vector<GridCell>& cells, int trials,
                                std::uint64_t seed) {
    nlohmann::json report;
    report["format"] = kCalibrationFormat;
    report["trials"] = trials;
    nlohmann::json out_cells = nlohmann::json::array();
    double pinned = 0.0;

    for (const auto& cell : cells) {
        Vec p(cell.O, 1.0 / cell.O), q(cell.O);
        for (int o = 0; o < cell.O; ++o) {
            q[o] = (o < cell.O / 2 ? 1.0 + cell.alpha : 1.0 - cell.alpha) / cell.O;
        }
        double norm = 0.0;
        for (double x : q) norm += x;
        for (auto& x : q) x /= norm;
        CategoricalDist dp(p), dq(q);

        nlohmann::json cell_out;
        cell_out["O"] = cell.O;
        cell_out["alpha"] = cell.alpha;
        cell_out["delta"] = cell.delta;
        nlohmann::json sweep = nlohmann::json::array();
        long long recommended = -1;

        Rng rng(seed, static_cast<std::uint64_t>(cell.O * 1000 + cell.alpha * 100));
        for (const long long k : cell.k_grid) {
            dist_testing::TestConfig cfg;
            cfg.delta = cell.delta;
            cfg.symbols = cell.O;
            cfg.alpha = cell.alpha;
            cfg.trace = dist_testing::TraceLevel::none;
            std::vector<int> x(k), y(k);
            int close_frej = 0, close_facc = 0, id_frej = 0, id_facc = 0;
            for (int t = 0; t < trials; ++t) {
                for (auto& o : x) o = dp.sample(rng);
                for (auto& o : y) o = dp.sample(rng);
                if (!dist_testing::closeness_test(x, y, cfg, rng).accepted()) ++close_frej;
                if (!dist_testing::identity_test(x, p, cfg, rng).accepted()) ++id_frej;
                for (auto& o : y) o = dq.sample(rng);
                if (dist_testing::closeness_test(x, y, cfg, rng).accepted()) ++close_facc;
                if (dist_testing::identity_test(y, p, cfg, rng).accepted()) ++id_facc;
            }
            const double n = trials;
            sweep.push_back({{"k", k},
                            {"closeness_false_reject", close_frej / n},
                            {"closeness_false_accept", close_facc / n},
                            {"identity_false_reject", id_frej / n},
                            {"identity_false_accept", id_facc / n}});
            const bool ok = close_frej <= trials * cell.delta && close_facc <= trials * cell.delta &&
                            id_frej <= trials * cell.delta && id_facc <= trials * cell.delta;
            if (ok && recommended < 0) recommended = k;
        }
        cell_out["sweep"] = std::move(sweep);
        cell_out["recommended_k"] = recommended;
        if (recommended > 0) {
            const double units = dist_testing::closeness_budget_units(cell.O, cell.alpha);
            pinned = std::max(pinned, recommended / (units * std::log(1.0 / cell.delta)));
        }
        out_cells.push_back(std::move(cell_out));
    }
    report["cells"] = std::move(out_cells);
    report["C1"] = pinned;
    return report;
}

inline std::vector<GridCell> parse_grid(const nlohmann::json& j) {
    if (!j.contains("format") || j["format"] != kGridFormat) {
        throw std::invalid_argument("grid file missing header \"format\": \"momdp-grid/1\"");
    }
    std::vector<GridCell> cells;
    for (const auto& c : j.at("cells")) {
        GridCell cell;
        cell.O = c.at("O").get<int>();
        cell.alpha = c.at("alpha").get<double>();
        cell.delta = c.at("delta").get<double>();
        cell.k_grid = c.at("k_grid").get<std::vector<long long>>();
        cells.push_back(std::move(cell));
    }
    return cells;
}

}  // namespace momdp::harness
