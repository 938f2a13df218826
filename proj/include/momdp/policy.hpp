#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "momdp/pomdp.hpp"
#include "momdp/rng.hpp"

namespace momdp {

// A realized first-slot history: interleaved [o_1, a_1, o_2, a_2, ..., o_h].
// Only in-episode (first-slot) observations ever appear in these keys; the
// hindsight observations are invisible to policies by construction.
using History = std::vector<int>;

// History-dependent policy: maps each realized history to a distribution over
// actions. Two backends: an explicit table (with uniform default for histories
// the table does not cover) or a callable, for policies that are cheaper to
// evaluate than to enumerate (e.g. belief-greedy heuristics).
class HistoryPolicy {
public:
    HistoryPolicy() = default;

    static HistoryPolicy uniform(int num_actions) {
        HistoryPolicy p;
        p.A_ = num_actions;
        return p;
    }

    static HistoryPolicy from_callable(int num_actions, std::function<Vec(const History&)> fn) {
        HistoryPolicy p;
        p.A_ = num_actions;
        p.fn_ = std::move(fn);
        return p;
    }

    // Open-loop policy: plays actions[h] at step h+1 regardless of history.
    static HistoryPolicy open_loop(int num_actions, std::vector<int> actions) {
        HistoryPolicy p;
        p.A_ = num_actions;
        p.fn_ = [actions, num_actions](const History& hist) {
            const int h = static_cast<int>(hist.size()) / 2;  // 0-based step index
            Vec dist(num_actions, 0.0);
            const int a = h < static_cast<int>(actions.size()) ? actions[h] : 0;
            dist[a] = 1.0;
            return dist;
        };
        return p;
    }

    int num_actions() const { return A_; }
    bool has_table() const { return !fn_; }
    const std::map<History, Vec>& table() const { return table_; }

    void set(const History& hist, Vec dist) {
        if (static_cast<int>(dist.size()) != A_) {
            throw std::invalid_argument("action distribution has wrong length");
        }
        double sum = 0.0;
        for (double p : dist) {
            if (!(p >= 0.0)) throw std::invalid_argument("action distribution has negative mass");
            sum += p;
        }
        if (std::fabs(sum - 1.0) > 1e-9) {
            throw std::invalid_argument("action distribution does not sum to 1");
        }
        table_[hist] = std::move(dist);
    }

    void set_action(const History& hist, int action) {
        Vec dist(A_, 0.0);
        dist.at(action) = 1.0;
        table_[hist] = std::move(dist);
    }

    Vec action_dist(const History& hist) const {
        if (fn_) return fn_(hist);
        auto it = table_.find(hist);
        if (it != table_.end()) return it->second;
        return Vec(A_, 1.0 / A_);
    }

    int sample_action(const History& hist, Rng& rng) const {
        const Vec dist = action_dist(hist);
        double u = rng.uniform();
        for (int a = 0; a + 1 < static_cast<int>(dist.size()); ++a) {
            u -= dist[a];
            if (u < 0.0) return a;
        }
        return static_cast<int>(dist.size()) - 1;
    }

    // Policy dump for inspection; table backend only.
    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format"] = "momdp-policy/1";
        j["A"] = A_;
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& [hist, dist] : table_) {
            entries.push_back({{"history", hist}, {"dist", dist}});
        }
        j["entries"] = std::move(entries);
        return j;
    }

private:
    int A_ = 1;
    std::map<History, Vec> table_;
    std::function<Vec(const History&)> fn_;
};

struct PlanResult {
    HistoryPolicy policy;
    double value = 0.0;
};

}  // namespace momdp
