#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "momdp/dist_testing.hpp"
#include "momdp/evaluate.hpp"
#include "momdp/planner.hpp"
#include "momdp/pomdp.hpp"
#include "momdp/rng.hpp"
#include "momdp/simulate.hpp"
#include "momdp/trajectory.hpp"

namespace momdp::ost {

// ---- pseudo-state store -----------------------------------------------------
//
// Per step, the labels discovered so far with their stored representative
// observation blocks. Testing a new block against every episode ever assigned
// to a label costs Theta(t) tests, so representatives are capped by a uniform
// reservoir by default; rep_cap = 0 keeps every block (exact mode).

struct PseudoStateStore {
    struct Label {
        std::vector<std::vector<int>> reps;
        long long assigned = 0;  // episodes carrying this label (reservoir denominator)
    };

    int k = 1;
    int rep_cap = 25;
    std::vector<std::vector<Label>> labels;          // [h][label]
    std::vector<std::vector<int>> assignment_log;    // [episode][h] -> label

    explicit PseudoStateStore(int H = 0, int k_ = 1, int rep_cap_ = 25)
        : k(k_), rep_cap(rep_cap_), labels(H) {}

    int num_labels(int h) const { return static_cast<int>(labels[h].size()); }
    int max_labels() const {
        int n = 0;
        for (const auto& step : labels) n = std::max(n, static_cast<int>(step.size()));
        return n;
    }
};

struct AssignStats {
    long long tests = 0;
    long long accepts = 0;
    long long rejects = 0;
    long long fails = 0;
    int new_labels = 0;
};

// Pseudo-state assignment via closeness testing: for each step, the block is
// matched against existing labels in increasing order and joins the first
// label all of whose stored blocks it passes the closeness test with;
// otherwise it founds a new label. Fail verdicts count as rejects.
inline std::vector<int> assign_pseudo_states(PseudoStateStore& store, const KObsTrajectory& traj,
                                             const dist_testing::TestConfig& test_cfg, Rng& rng,
                                             AssignStats* stats = nullptr) {
    if (traj.k != store.k) throw std::invalid_argument("assign_pseudo_states: block length mismatch");
    if (static_cast<int>(store.labels.size()) != traj.H) {
        throw std::invalid_argument("assign_pseudo_states: horizon mismatch");
    }
    std::vector<int> out(traj.H, -1);
    for (int h = 0; h < traj.H; ++h) {
        const auto& block = traj.obs[h];
        int chosen = -1;
        for (int lbl = 0; lbl < store.num_labels(h) && chosen < 0; ++lbl) {
            bool all_accept = true;
            for (const auto& rep : store.labels[h][lbl].reps) {
                const auto res = dist_testing::closeness_test(block, rep, test_cfg, rng);
                if (stats) {
                    ++stats->tests;
                    if (res.verdict == dist_testing::TestVerdict::accept) ++stats->accepts;
                    else if (res.verdict == dist_testing::TestVerdict::reject) ++stats->rejects;
                    else ++stats->fails;
                }
                if (!res.accepted()) {  // fail verdicts reject for assignment purposes
                    all_accept = false;
                    break;
                }
            }
            if (all_accept) chosen = lbl;
        }
        if (chosen < 0) {
            store.labels[h].emplace_back();
            chosen = store.num_labels(h) - 1;
            if (stats) ++stats->new_labels;
        }
        auto& label = store.labels[h][chosen];
        ++label.assigned;
        if (store.rep_cap <= 0 || static_cast<int>(label.reps.size()) < store.rep_cap) {
            label.reps.push_back(block);
        } else {
            // uniform reservoir over all blocks ever assigned to this label
            const auto j = rng.bounded(static_cast<std::uint32_t>(label.assigned));
            if (static_cast<int>(j) < store.rep_cap) label.reps[j] = block;
        }
        out[h] = chosen;
    }
    store.assignment_log.push_back(out);
    return out;
}

// ---- bonuses and defaults ------------------------------------------------------

inline double bonus_sa(double beta1, long long n, int H) {
    if (n <= 0) return 2.0 * H;
    return std::min(std::sqrt(beta1 / static_cast<double>(n)), 2.0 * H);
}

inline double bonus_s(double beta2, long long n) {
    if (n <= 0) return 2.0;
    return std::min(std::sqrt(beta2 / static_cast<double>(n)), 2.0);
}

// Bonus pair for one (h, s, a) cell from the current visit counts.
struct Bonuses {
    double b_s = 0.0;
    double b_sa = 0.0;
};

inline double beta1_default(int H, int O, int S, int A, int T, double delta, double c1 = 1.0) {
    return c1 * std::pow(H, 3) *
           std::log(static_cast<double>(O) * S * A * H * std::max(T, 2) / delta);
}

inline double beta2_default(int O, int S, int T, int H, double delta, double c2 = 1.0) {
    return c2 * O * std::log(static_cast<double>(O) * S * std::max(T, 2) * H / delta);
}

// ---- empirical model over pseudo-states -----------------------------------------

// Visit counts and empirical (T, O, r) estimates over the label spaces,
// recomputable exactly from the assignment record plus the trajectories.
struct OstState {
    int H = 0, A = 0, O = 0;
    int t = 0;  // episodes folded in
    std::vector<std::vector<long long>> n_s;                            // [h][label]
    std::vector<std::vector<std::vector<long long>>> n_sa;              // [h][label][a]
    std::vector<std::vector<std::vector<std::vector<long long>>>> n_tr; // [h][label][a][label']
    std::vector<std::vector<std::vector<long long>>> n_obs;             // [h][label][o]
    long long obs_slots = 0;  // 1 (first-slot counts) or k (all-k mode)

    void init(int H_, int A_, int O_) {
        H = H_;
        A = A_;
        O = O_;
        t = 0;
        n_s.assign(H, {});
        n_sa.assign(H, {});
        n_tr.assign(H, {});
        n_obs.assign(H, {});
        obs_slots = 1;
    }

    void ensure_label(int h, int lbl) {
        while (static_cast<int>(n_s[h].size()) <= lbl) {
            n_s[h].push_back(0);
            n_sa[h].emplace_back(A, 0);
            n_tr[h].emplace_back(A, std::vector<long long>());
            n_obs[h].emplace_back(O, 0);
        }
    }

    void fold_episode(const KObsTrajectory& traj, const std::vector<int>& labels,
                      bool all_k_emissions) {
        obs_slots = all_k_emissions ? traj.k : 1;
        for (int h = 0; h < H; ++h) {
            const int lbl = labels[h];
            ensure_label(h, lbl);
            ++n_s[h][lbl];
            ++n_sa[h][lbl][traj.actions[h]];
            if (all_k_emissions) {
                for (int o : traj.obs[h]) ++n_obs[h][lbl][o];
            } else {
                ++n_obs[h][lbl][traj.first_obs(h)];
            }
            if (h + 1 < H) {
                ensure_label(h + 1, labels[h + 1]);
                auto& row = n_tr[h][lbl][traj.actions[h]];
                if (static_cast<int>(row.size()) <= labels[h + 1]) row.resize(labels[h + 1] + 1, 0);
                ++row[labels[h + 1]];
            }
        }
        ++t;
    }
};

inline Bonuses compute_bonuses(const OstState& state, double beta1, double beta2, int h, int s,
                               int a) {
    const long long n_s = s < static_cast<int>(state.n_s[h].size()) ? state.n_s[h][s] : 0;
    const long long n_sa =
        s < static_cast<int>(state.n_sa[h].size()) ? state.n_sa[h][s][a] : 0;
    return {bonus_s(beta2, n_s), bonus_sa(beta1, n_sa, state.H)};
}

// Rebuild the counts from scratch; the incremental path must agree exactly.
inline OstState estimate_from_record(const std::vector<KObsTrajectory>& trajectories,
                                     const std::vector<std::vector<int>>& assignments, int H,
                                     int A, int O, bool all_k_emissions = false) {
    OstState st;
    st.init(H, A, O);
    for (size_t i = 0; i < trajectories.size(); ++i) {
        st.fold_episode(trajectories[i], assignments[i], all_k_emissions);
    }
    return st;
}

inline Bonuses compute_bonuses(const struct OstState& state, double beta1, double beta2, int h,
                               int s, int a);

struct PseudoModel {
    planner::LatentRewardPOMDP planner_input;  // dynamics + optimistic rewards
    std::vector<Vec> r_bar;                    // [h][label] empirical mean reward
    int num_states = 1;
};

// Empirical pseudo latent model plus the bonus-inflated optimistic reward
// r_hat(h,s,a) = min{1, r_bar(h,s) + H*b(s) + b(s,a)}. Zero-count rows fall
// back to uniform placeholders with the full bonus.
inline PseudoModel build_pseudo_model(const OstState& st, const std::vector<Vec>& reward_map,
                                      double beta1, double beta2) {
    PseudoModel pm;
    const int H = st.H, A = st.A, O = st.O;
    int S = 1;
    for (int h = 0; h < H; ++h) S = std::max(S, static_cast<int>(st.n_s[h].size()));
    pm.num_states = S;

    TabularPOMDP& m = pm.planner_input.base;
    m.S = S;
    m.A = A;
    m.O = O;
    m.H = H;
    m.d0.assign(S, 0.0);
    if (!st.n_s.empty() && st.t > 0) {
        for (size_t lbl = 0; lbl < st.n_s[0].size(); ++lbl) {
            m.d0[lbl] = static_cast<double>(st.n_s[0][lbl]) / st.t;
        }
    } else {
        m.d0.assign(S, 1.0 / S);
    }

    m.T.assign(H, std::vector<std::vector<Vec>>(S, std::vector<Vec>(A, Vec(S, 1.0 / S))));
    m.E.assign(H, std::vector<Vec>(S, Vec(O, 1.0 / O)));
    m.r.assign(H, Vec(O, 0.0));  // planner uses latent rewards; base map unused
    pm.r_bar.assign(H, Vec(S, 0.0));
    pm.planner_input.r.assign(H, std::vector<Vec>(S, Vec(A, 0.0)));
    pm.planner_input.r_max = 1.0;

    for (int h = 0; h < H; ++h) {
        const int labels_h = static_cast<int>(st.n_s[h].size());
        for (int lbl = 0; lbl < labels_h; ++lbl) {
            const long long n = st.n_s[h][lbl];
            if (n > 0) {
                const double denom = static_cast<double>(n) * st.obs_slots;
                for (int o = 0; o < O; ++o) m.E[h][lbl][o] = st.n_obs[h][lbl][o] / denom;
            }
            double rb = 0.0;
            for (int o = 0; o < O; ++o) rb += m.E[h][lbl][o] * reward_map[h][o];
            pm.r_bar[h][lbl] = n > 0 ? rb : 0.0;

            for (int a = 0; a < A; ++a) {
                const long long nsa = st.n_sa[h][lbl][a];
                if (h + 1 < H && nsa > 0) {
                    auto& row = m.T[h][lbl][a];
                    row.assign(S, 0.0);
                    const auto& counts = st.n_tr[h][lbl][a];
                    for (size_t nxt = 0; nxt < counts.size(); ++nxt) {
                        row[nxt] = static_cast<double>(counts[nxt]) / nsa;
                    }
                    // transition counts condition on (s,a) at step h; episodes
                    // always carry a next label, so the row sums to one
                }
                const double b_sa = bonus_sa(beta1, nsa, H);
                const double b_s = bonus_s(beta2, n);
                pm.planner_input.r[h][lbl][a] =
                    std::min(1.0, pm.r_bar[h][lbl] + H * b_s + b_sa);
            }
        }
        // labels beyond this step's discovered set keep uniform placeholders
        for (int lbl = labels_h; lbl < S; ++lbl) {
            for (int a = 0; a < A; ++a) {
                pm.planner_input.r[h][lbl][a] = std::min(1.0, 0.0 + H * 2.0 + 2.0 * H);
            }
        }
    }
    return pm;
}

// ---- the OST loop -----------------------------------------------------------------

struct OstConfig {
    int T = 100;
    int k = 1;
    double beta1 = 1.0;
    double beta2 = 1.0;
    double delta = 0.1;
    double test_delta = 0.0;  // 0 -> delta / (2 * S_guess * T * H)
    int test_blocks = 0;      // force the closeness tests' block count (0 = from delta)
    int S_guess = 2;          // union-bound split for the per-test delta
    int rep_cap = 25;
    bool all_k_emissions = false;
    bool oracle_eval = true;    // record exact policy values against the true model
    bool oracle_states = true;  // simulate in oracle mode and check the permutation event
    long long node_cap = kDefaultHistoryNodeCap;
};

struct IterationLog {
    int t = 0;
    double value = 0.0;   // oracle value of pi_t
    double regret = 0.0;  // V* - value
    int max_labels = 0;
    long long tests = 0, accepts = 0, rejects = 0, fails = 0;
    double max_bonus_s = 0.0, max_bonus_sa = 0.0;  // largest bonuses fed to the planner
};

struct OstResult {
    double v_star = 0.0;
    std::vector<IterationLog> logs;
    std::vector<double> cum_regret;
    double final_value = 0.0;
    double best_value = 0.0;
    double best_episode_return = 0.0;  // best realized single-episode return
    bool permutation_ok = true;        // labels match true states up to per-step bijection
    bool distinguishable = true;       // alpha > 0 at every step of the true model
    PseudoStateStore store{0, 1, 25};
    OstState state;
    long long observations_used = 0;
};

// Does a per-step bijection labels -> true states exist that makes every
// logged assignment correct? Checked exactly from the oracle states.
inline bool permutation_event_holds(const PseudoStateStore& store,
                                    const std::vector<std::vector<int>>& hidden, int S) {
    const int H = static_cast<int>(store.labels.size());
    for (int h = 0; h < H; ++h) {
        if (store.num_labels(h) > S) return false;
        std::vector<int> label_to_state(store.num_labels(h), -1);
        std::vector<int> state_to_label(S, -1);
        for (size_t ep = 0; ep < store.assignment_log.size(); ++ep) {
            const int lbl = store.assignment_log[ep][h];
            const int s = hidden[ep][h];
            if (label_to_state[lbl] == -1) {
                if (state_to_label[s] != -1) return false;
                label_to_state[lbl] = s;
                state_to_label[s] = lbl;
            } else if (label_to_state[lbl] != s) {
                return false;
            }
        }
    }
    return true;
}

inline OstResult run_ost(const TabularPOMDP& env, const OstConfig& cfg, std::uint64_t seed) {
    validate_or_throw(env);
    OstResult res;
    res.store = PseudoStateStore(env.H, cfg.k, cfg.rep_cap);
    res.state.init(env.H, env.A, env.O);

    {
        // distinguishability diagnostic: the guarantee is vacuous at alpha = 0,
        // the run itself still completes
        double alpha = 2.0;
        for (int h = 0; h < env.H; ++h) {
            alpha = std::min(alpha, dist_testing::detail::step_distinguishability(env, h));
        }
        res.distinguishable = alpha > 0.0;
    }

    dist_testing::TestConfig test_cfg;
    test_cfg.k = cfg.k;
    test_cfg.delta = cfg.test_delta > 0.0
                         ? cfg.test_delta
                         : cfg.delta / (2.0 * cfg.S_guess * std::max(cfg.T, 1) * env.H);
    test_cfg.M = cfg.test_blocks;
    test_cfg.symbols = env.O;
    test_cfg.trace = dist_testing::TraceLevel::none;

    Rng sim_rng(seed, 1);
    Rng test_rng(seed, 2);
    Rng tie_rng(seed, 3);

    if (cfg.oracle_eval) {
        res.v_star = planner::pop_exact(planner::from_observation_rewards(env), cfg.node_cap).value;
    }

    std::vector<std::vector<int>> hidden_log;
    double cum = 0.0;
    for (int t = 1; t <= cfg.T; ++t) {
        const auto pm = build_pseudo_model(res.state, env.r, cfg.beta1, cfg.beta2);
        const auto plan = planner::pop_exact(pm.planner_input, cfg.node_cap, &tie_rng);
        // with no data yet every policy maximizes the saturated optimistic
        // model; play the uniform representative
        const HistoryPolicy policy =
            res.state.t == 0 ? HistoryPolicy::uniform(env.A) : plan.policy;

        const auto traj = simulate_episode(env, policy, cfg.k, sim_rng, cfg.oracle_states);
        res.observations_used += static_cast<long long>(env.H) * cfg.k;
        double ep_return = 0.0;
        for (int h = 0; h < env.H; ++h) ep_return += env.reward(h, traj.first_obs(h));
        res.best_episode_return = std::max(res.best_episode_return, ep_return);

        AssignStats stats;
        const auto labels = assign_pseudo_states(res.store, traj, test_cfg, test_rng, &stats);
        res.state.fold_episode(traj, labels, cfg.all_k_emissions);
        if (cfg.oracle_states) hidden_log.push_back(traj.hidden_states);

        IterationLog log;
        log.t = t;
        log.max_labels = res.store.max_labels();
        for (int h = 0; h < env.H; ++h) {
            for (size_t lbl = 0; lbl < res.state.n_s[h].size(); ++lbl) {
                log.max_bonus_s = std::max(log.max_bonus_s, bonus_s(cfg.beta2, res.state.n_s[h][lbl]));
                for (int a = 0; a < env.A; ++a) {
                    log.max_bonus_sa =
                        std::max(log.max_bonus_sa, bonus_sa(cfg.beta1, res.state.n_sa[h][lbl][a], env.H));
                }
            }
        }
        log.tests = stats.tests;
        log.accepts = stats.accepts;
        log.rejects = stats.rejects;
        log.fails = stats.fails;
        if (cfg.oracle_eval) {
            log.value = evaluate_policy(env, policy, cfg.node_cap);
            log.regret = res.v_star - log.value;
            res.best_value = std::max(res.best_value, log.value);
            res.final_value = log.value;
            cum += log.regret;
        }
        res.cum_regret.push_back(cum);
        res.logs.push_back(std::move(log));
    }
    if (cfg.oracle_states) {
        res.permutation_ok = permutation_event_holds(res.store, hidden_log, env.S);
    }
    return res;
}

}  // namespace momdp::ost
