#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "momdp/evaluate.hpp"
#include "momdp/likelihood.hpp"
#include "momdp/planner.hpp"
#include "momdp/pomdp.hpp"
#include "momdp/rng.hpp"
#include "momdp/simulate.hpp"

namespace momdp::komle {

// Explicit finite candidate class. All candidates share (S, A, O, H); the
// optimistic covering machinery of the general theory is replaced by direct
// enumeration, with beta = log(|Theta| T / delta) as the default width.
struct ModelClass {
    std::vector<TabularPOMDP> models;
    double beta = 0.0;
    int truth_index = -1;  // oracle metadata for experiments; -1 when unknown

    void check() const {
        if (models.empty()) throw std::invalid_argument("model class is empty");
        for (const auto& m : models) {
            if (m.S != models[0].S || m.A != models[0].A || m.O != models[0].O ||
                m.H != models[0].H) {
                throw std::invalid_argument("candidates must share (S, A, O, H)");
            }
            validate_or_throw(m);
        }
        if (beta < 0.0) throw std::invalid_argument("beta must be nonnegative");
    }
};

inline double beta_finite_class(std::size_t num_models, int T, double delta) {
    return std::log(static_cast<double>(num_models) * std::max(T, 1) / delta);
}

// The tabular-class width from the theory (log-covering-number form); kept for
// reference experiments that want the structural scaling rather than the
// finite-class default.
inline double beta_tabular(int S, int A, int O, int H, double delta) {
    return H * (static_cast<double>(S) * S * A + static_cast<double>(S) * O) +
           std::log(1.0 / delta);
}

// Exploration policy h (1-based): follow pi for steps < h, play uniformly at
// every step >= h.
inline HistoryPolicy exploration_policy(const HistoryPolicy& pi, int h, int A) {
    return HistoryPolicy::from_callable(A, [pi, h, A](const History& hist) {
        const int step = static_cast<int>(hist.size()) / 2 + 1;  // 1-based
        if (step < h) return pi.action_dist(hist);
        return Vec(A, 1.0 / A);
    });
}

inline std::vector<HistoryPolicy> exploration_policies(const HistoryPolicy& pi, int H, int A) {
    std::vector<HistoryPolicy> out;
    out.reserve(H);
    for (int h = 1; h <= H; ++h) out.push_back(exploration_policy(pi, h, A));
    return out;
}

// Super level set of the total log-likelihood: candidates within beta of the
// best score. The ledger keeps per-candidate running scores so updates are
// incremental in the dataset.
struct ConfidenceSet {
    std::vector<int> members;      // candidate indices, ascending
    std::vector<double> loglik;    // per-candidate total scores
    double max_loglik = 0.0;

    bool contains(int idx) const {
        return std::find(members.begin(), members.end(), idx) != members.end();
    }
};

inline ConfidenceSet update_confidence_set(const ModelClass& mc, const std::vector<double>& loglik,
                                           double beta) {
    ConfidenceSet cs;
    cs.loglik = loglik;
    cs.max_loglik = *std::max_element(loglik.begin(), loglik.end());
    if (cs.max_loglik == -std::numeric_limits<double>::infinity()) {
        throw std::runtime_error(
            "confidence set is empty: the dataset is impossible under every candidate");
    }
    for (int i = 0; i < static_cast<int>(mc.models.size()); ++i) {
        if (loglik[i] >= cs.max_loglik - beta) cs.members.push_back(i);
    }
    return cs;
}

// Scores a dataset from scratch; the incremental ledger in run_komle must
// agree with this exactly.
inline std::vector<double> score_dataset(const ModelClass& mc,
                                         const std::vector<HistoryPolicy>& policies,
                                         const std::vector<KObsTrajectory>& trajectories) {
    std::vector<double> loglik(mc.models.size(), 0.0);
    for (size_t i = 0; i < trajectories.size(); ++i) {
        for (size_t j = 0; j < mc.models.size(); ++j) {
            loglik[j] += trajectory_log_likelihood(mc.models[j], policies[i], trajectories[i]);
        }
    }
    return loglik;
}

struct Selection {
    int index = -1;
    double value = 0.0;
    HistoryPolicy policy;
};

// Plans once per candidate (the optimal value of a fixed model never changes)
// and caches the result.
class OptimisticSelector {
public:
    explicit OptimisticSelector(const ModelClass& mc, long long node_cap = kDefaultHistoryNodeCap)
        : mc_(mc), node_cap_(node_cap), plans_(mc.models.size()) {}

    // Highest optimal value among surviving candidates; ties go to the lower
    // candidate index.
    Selection select(const ConfidenceSet& cs) {
        if (cs.members.empty()) throw std::invalid_argument("optimistic_select: empty set");
        Selection best;
        for (int idx : cs.members) {
            const auto& plan = plan_for(idx);
            if (best.index == -1 || plan.value > best.value + 1e-12) {
                best.index = idx;
                best.value = plan.value;
                best.policy = plan.policy;
            }
        }
        return best;
    }

    const PlanResult& plan_for(int idx) {
        if (!plans_[idx].has_value()) {
            plans_[idx] =
                planner::pop_exact(planner::from_observation_rewards(mc_.models[idx]), node_cap_);
        }
        return *plans_[idx];
    }

private:
    const ModelClass& mc_;
    long long node_cap_;
    std::vector<std::optional<PlanResult>> plans_;
};

struct KomleLogRow {
    int t = 0;
    double optimistic_value = 0.0;  // V*(theta_t), the selected candidate's promise
    double oracle_value = 0.0;      // exact value of pi_t in the true environment
    int confset_size = 0;
    int selected = -1;
    bool truth_retained = true;
};

struct KomleResult {
    HistoryPolicy final_policy;
    double final_value = 0.0;       // oracle value of pi_T
    double v_star = 0.0;            // optimum of the true environment
    std::vector<KomleLogRow> trace;
    bool truth_always_retained = true;
    int iterations_run = 0;
    long long episodes_used = 0;
    long long observations_used = 0;  // episodes * H * k, the feedback-model account
};

struct KomleConfig {
    int T = 100;
    int k = 1;
    long long episode_budget = -1;  // cap on episodes; -1 = T full iterations
    bool oracle_eval = true;
    long long node_cap = kDefaultHistoryNodeCap;
};

// Optimistic maximum likelihood estimation under k-observation feedback: per
// iteration, plan optimistically over the surviving candidates, execute the H
// exploration policies pi_t composed with uniform tails, fold the trajectories
// into the likelihood ledger, and shrink the confidence set.
inline KomleResult run_komle(const TabularPOMDP& env, const ModelClass& mc,
                             const KomleConfig& cfg, std::uint64_t seed) {
    validate_or_throw(env);
    mc.check();
    const int H = env.H;
    Rng sim_rng(seed, 11);

    KomleResult res;
    OptimisticSelector selector(mc, cfg.node_cap);
    std::vector<double> loglik(mc.models.size(), 0.0);
    if (cfg.oracle_eval) {
        res.v_star = planner::pop_exact(planner::from_observation_rewards(env), cfg.node_cap).value;
    }
    // the no-data policy: uniform until at least one full iteration completes
    res.final_policy = HistoryPolicy::uniform(env.A);
    if (cfg.oracle_eval) res.final_value = evaluate_policy(env, res.final_policy, cfg.node_cap);

    const long long budget = cfg.episode_budget;
    int iterations = cfg.T;
    if (budget >= 0) iterations = std::min<long long>(iterations, budget / H);

    ConfidenceSet cs = update_confidence_set(mc, loglik, mc.beta);
    for (int t = 1; t <= iterations; ++t) {
        const auto sel = selector.select(cs);
        const auto expl = exploration_policies(sel.policy, H, env.A);
        for (const auto& pi : expl) {
            const auto traj = simulate_episode(env, pi, cfg.k, sim_rng);
            ++res.episodes_used;
            res.observations_used += static_cast<long long>(H) * cfg.k;
            for (size_t j = 0; j < mc.models.size(); ++j) {
                loglik[j] += trajectory_log_likelihood(mc.models[j], pi, traj);
            }
        }
        cs = update_confidence_set(mc, loglik, mc.beta);

        KomleLogRow row;
        row.t = t;
        row.optimistic_value = sel.value;
        row.confset_size = static_cast<int>(cs.members.size());
        row.selected = sel.index;
        if (mc.truth_index >= 0) {
            row.truth_retained = cs.contains(mc.truth_index);
            res.truth_always_retained = res.truth_always_retained && row.truth_retained;
        }
        if (cfg.oracle_eval) row.oracle_value = evaluate_policy(env, sel.policy, cfg.node_cap);
        res.trace.push_back(row);

        res.final_policy = sel.policy;
        if (cfg.oracle_eval) res.final_value = res.trace.back().oracle_value;
        res.iterations_run = t;
    }
    return res;
}

}  // namespace momdp::komle
