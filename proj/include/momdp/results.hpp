#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace momdp::results {

// Metric names are drawn from a fixed registry so downstream scripts can rely
// on the vocabulary.
inline constexpr std::array<const char*, 9> kMetricRegistry = {
    "regret", "cum_regret", "value", "optimistic_value", "confset_size",
    "test_error", "alpha", "rank", "norm"};

inline bool known_metric(const std::string& name) {
    for (const char* m : kMetricRegistry) {
        if (name == m) return true;
    }
    return false;
}

// One measurement: (experiment, seed, iteration, metric, value), plus the
// cumulative observation count so OST and k-OMLE curves share the
// feedback-model sample axis (each round counts as k*H observations).
struct ResultRow {
    std::string experiment;
    std::uint64_t seed = 0;
    int iteration = 0;
    long long samples = 0;
    std::string metric;
    double value = 0.0;
};

inline constexpr const char* kResultsHeader = "experiment,seed,iteration,samples,metric,value";

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline void write_csv(const std::vector<ResultRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write results file: " + path);
    out << kResultsHeader << "\n";
    for (const auto& r : rows) {
        if (!known_metric(r.metric)) {
            throw std::invalid_argument("unknown metric name: " + r.metric);
        }
        out << r.experiment << ',' << r.seed << ',' << r.iteration << ',' << r.samples << ','
            << r.metric << ',' << format_double(r.value) << "\n";
    }
}

inline void write_jsonl(const std::vector<nlohmann::json>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write log file: " + path);
    for (const auto& j : rows) out << j.dump() << "\n";
}

}  // namespace momdp::results
