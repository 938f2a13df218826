#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace momdp {

using Vec = std::vector<double>;

constexpr double kStochasticTol = 1e-9;

// Tabular POMDP over dense index sets: states [S], actions [A], observations
// [O], steps 1..H. Emissions are stored one row per state (the row is that
// state's distribution over observations, i.e. a column of the O x S emission
// matrix). Rewards are per-step functions of the observation only.
struct TabularPOMDP {
    int S = 0;
    int A = 0;
    int O = 0;
    int H = 0;
    Vec d0;                                          // initial state distribution
    std::vector<std::vector<std::vector<Vec>>> T;    // [h][s][a] -> dist over s'
    std::vector<std::vector<Vec>> E;                 // [h][s] -> dist over o
    std::vector<Vec> r;                              // [h][o] -> reward in [0,1]

    const Vec& transition(int h, int s, int a) const { return T[h][s][a]; }
    const Vec& emission(int h, int s) const { return E[h][s]; }
    double reward(int h, int o) const { return r[h][o]; }
};

namespace detail {
inline bool is_distribution(const Vec& v, int n) {
    if (static_cast<int>(v.size()) != n) return false;
    double sum = 0.0;
    for (double x : v) {
        if (!(x >= 0.0)) return false;
        sum += x;
    }
    return std::fabs(sum - 1.0) <= kStochasticTol;
}
}  // namespace detail

// Diagnostic validation: returns one message per violated invariant, empty
// when the model is well-formed.
inline std::vector<std::string> validate(const TabularPOMDP& m) {
    std::vector<std::string> out;
    auto fail = [&out](const std::string& msg) { out.push_back(msg); };
    char buf[160];

    if (m.S <= 0 || m.A <= 0 || m.O <= 0 || m.H <= 0) {
        fail("dimensions S, A, O, H must all be positive");
        return out;
    }
    if (!detail::is_distribution(m.d0, m.S)) fail("d0 is not a probability vector over [S]");

    if (static_cast<int>(m.T.size()) != m.H) fail("T must have H step slices");
    if (static_cast<int>(m.E.size()) != m.H) fail("E must have H step slices");
    if (static_cast<int>(m.r.size()) != m.H) fail("r must have H step slices");
    if (!out.empty()) return out;

    for (int h = 0; h < m.H; ++h) {
        if (static_cast<int>(m.T[h].size()) != m.S) {
            fail("T[" + std::to_string(h + 1) + "] must have S rows");
            continue;
        }
        for (int s = 0; s < m.S; ++s) {
            if (static_cast<int>(m.T[h][s].size()) != m.A) {
                fail("T[" + std::to_string(h + 1) + "][" + std::to_string(s) + "] must have A rows");
                continue;
            }
            for (int a = 0; a < m.A; ++a) {
                if (!detail::is_distribution(m.T[h][s][a], m.S)) {
                    std::snprintf(buf, sizeof(buf),
                                  "transition row (h=%d, s=%d, a=%d) is not a probability vector",
                                  h + 1, s, a);
                    fail(buf);
                }
            }
        }
    }
    for (int h = 0; h < m.H; ++h) {
        if (static_cast<int>(m.E[h].size()) != m.S) {
            fail("E[" + std::to_string(h + 1) + "] must have S rows");
            continue;
        }
        for (int s = 0; s < m.S; ++s) {
            if (!detail::is_distribution(m.E[h][s], m.O)) {
                std::snprintf(buf, sizeof(buf),
                              "emission row (h=%d, s=%d) is not a probability vector", h + 1, s);
                fail(buf);
            }
        }
    }
    for (int h = 0; h < m.H; ++h) {
        if (static_cast<int>(m.r[h].size()) != m.O) {
            fail("r[" + std::to_string(h + 1) + "] must have O entries");
            continue;
        }
        for (int o = 0; o < m.O; ++o) {
            const double x = m.r[h][o];
            if (!(x >= 0.0 && x <= 1.0)) {
                std::snprintf(buf, sizeof(buf), "reward (h=%d, o=%d) = %g outside [0,1]", h + 1, o, x);
                fail(buf);
            }
        }
    }
    return out;
}

inline void validate_or_throw(const TabularPOMDP& m) {
    auto v = validate(m);
    if (!v.empty()) throw std::invalid_argument("invalid POMDP: " + v.front());
}

// ---- momdp-spec/1 file format ----------------------------------------------
//
// JSON with a versioned header. Arrays are row-major:
//   T[h][s][a] is the next-state distribution, E[h][s] the observation
//   distribution of state s, r[h] the per-observation reward row.
// Probability rows within kStochasticTol of 1 are renormalized on load; rows
// further off are reported as validation errors by the caller.

inline constexpr const char* kSpecFormat = "momdp-spec/1";

inline nlohmann::json to_spec_json(const TabularPOMDP& m) {
    nlohmann::json j;
    j["format"] = kSpecFormat;
    j["S"] = m.S;
    j["A"] = m.A;
    j["O"] = m.O;
    j["H"] = m.H;
    j["d0"] = m.d0;
    j["T"] = m.T;
    j["E"] = m.E;
    j["r"] = m.r;
    return j;
}

namespace detail {
inline void renormalize(Vec& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    if (sum > 0.0 && std::fabs(sum - 1.0) <= kStochasticTol) {
        for (double& x : v) x /= sum;
    }
}
}  // namespace detail

inline TabularPOMDP from_spec_json(const nlohmann::json& j) {
    if (!j.contains("format") || j["format"] != kSpecFormat) {
        throw std::invalid_argument("spec file missing header \"format\": \"momdp-spec/1\"");
    }
    TabularPOMDP m;
    m.S = j.at("S").get<int>();
    m.A = j.at("A").get<int>();
    m.O = j.at("O").get<int>();
    m.H = j.at("H").get<int>();
    m.d0 = j.at("d0").get<Vec>();
    m.T = j.at("T").get<std::vector<std::vector<std::vector<Vec>>>>();
    m.E = j.at("E").get<std::vector<std::vector<Vec>>>();
    m.r = j.at("r").get<std::vector<Vec>>();

    detail::renormalize(m.d0);
    for (auto& step : m.T)
        for (auto& row : step)
            for (auto& dist : row) detail::renormalize(dist);
    for (auto& step : m.E)
        for (auto& dist : step) detail::renormalize(dist);
    return m;
}

inline TabularPOMDP load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open spec file: " + path);
    nlohmann::json j;
    in >> j;
    return from_spec_json(j);
}

inline void save_spec(const TabularPOMDP& m, const std::string& path,
                      const nlohmann::json* recipe = nullptr) {
    nlohmann::json j = to_spec_json(m);
    if (recipe) j["recipe"] = *recipe;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write spec file: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace momdp
