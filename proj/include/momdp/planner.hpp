#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "momdp/evaluate.hpp"
#include "momdp/policy.hpp"
#include "momdp/pomdp.hpp"
#include "momdp/rng.hpp"

namespace momdp::planner {

// POMDP with latent rewards r(h, s, a): the planning-oracle input. The base
// model supplies dynamics and emissions; its observation rewards are unused.
struct LatentRewardPOMDP {
    TabularPOMDP base;
    std::vector<std::vector<Vec>> r;  // [h][s][a]
    double r_max = 1.0;

    void check() const {
        validate_or_throw(base);
        if (static_cast<int>(r.size()) != base.H) throw std::invalid_argument("latent reward: bad H");
        for (const auto& step : r) {
            if (static_cast<int>(step.size()) != base.S) throw std::invalid_argument("latent reward: bad S");
            for (const auto& row : step) {
                if (static_cast<int>(row.size()) != base.A) throw std::invalid_argument("latent reward: bad A");
                for (double v : row) {
                    if (!(v >= 0.0 && v <= r_max)) {
                        throw std::invalid_argument("latent reward outside [0, r_max]");
                    }
                }
            }
        }
    }
};

// Observation-expected latent rewards: r(h,s,a) = sum_o E_h(o|s) r_h(o).
inline LatentRewardPOMDP from_observation_rewards(const TabularPOMDP& m) {
    LatentRewardPOMDP out;
    out.base = m;
    out.r_max = 1.0;
    out.r.assign(m.H, std::vector<Vec>(m.S, Vec(m.A, 0.0)));
    for (int h = 0; h < m.H; ++h) {
        for (int s = 0; s < m.S; ++s) {
            double v = 0.0;
            for (int o = 0; o < m.O; ++o) v += m.E[h][s][o] * m.r[h][o];
            std::fill(out.r[h][s].begin(), out.r[h][s].end(), v);
        }
    }
    return out;
}

inline double evaluate_policy_latent(const LatentRewardPOMDP& m, const HistoryPolicy& policy,
                                     long long node_cap = kDefaultHistoryNodeCap) {
    m.check();
    return detail::evaluate_policy_impl(
        m.base, policy, [&m](int h, int s, int a, int /*o*/) { return m.r[h][s][a]; }, node_cap);
}

namespace detail {

using BeliefKey = std::vector<long long>;

// Beliefs quantized at 1e-9 per coordinate merge numerically identical nodes.
inline BeliefKey belief_key(int h, const Vec& b) {
    BeliefKey key(b.size() + 1);
    key[0] = h;
    for (size_t i = 0; i < b.size(); ++i) key[i + 1] = llround(b[i] * 1e9);
    return key;
}

struct ExactPlanner {
    const LatentRewardPOMDP& m;
    Rng* tie_rng;
    std::map<BeliefKey, std::pair<double, int>> memo;

    // b: normalized belief after observing o_h. Returns the optimal
    // continuation value from step h and caches the maximizing action.
    std::pair<double, int> best(int h, const Vec& b) {
        const auto key = belief_key(h, b);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;

        const auto& base = m.base;
        double best_v = -1.0;
        std::vector<int> argmax;
        Vec next(base.S), posterior(base.S);
        for (int a = 0; a < base.A; ++a) {
            double v = 0.0;
            for (int s = 0; s < base.S; ++s) v += b[s] * m.r[h][s][a];
            if (h + 1 < base.H) {
                std::fill(next.begin(), next.end(), 0.0);
                for (int s = 0; s < base.S; ++s) {
                    if (b[s] == 0.0) continue;
                    const Vec& tr = base.transition(h, s, a);
                    for (int sp = 0; sp < base.S; ++sp) next[sp] += b[s] * tr[sp];
                }
                for (int o = 0; o < base.O; ++o) {
                    double p_o = 0.0;
                    for (int s = 0; s < base.S; ++s) {
                        posterior[s] = next[s] * base.emission(h + 1, s)[o];
                        p_o += posterior[s];
                    }
                    if (p_o == 0.0) continue;
                    Vec normalized(base.S);
                    for (int s = 0; s < base.S; ++s) normalized[s] = posterior[s] / p_o;
                    v += p_o * best(h + 1, normalized).first;
                }
            }
            if (v > best_v + 1e-12) {
                best_v = v;
                argmax.assign(1, a);
            } else if (v >= best_v - 1e-12) {
                argmax.push_back(a);
            }
        }
        int chosen = argmax.front();
        if (tie_rng && argmax.size() > 1) {
            chosen = argmax[tie_rng->bounded(static_cast<std::uint32_t>(argmax.size()))];
        }
        auto result = std::make_pair(best_v, chosen);
        memo.emplace(key, result);
        return result;
    }

    // Walk the realized histories and materialize the decision table.
    void extract(int h, const Vec& b, History& hist, HistoryPolicy& policy) {
        const int a = memo.at(belief_key(h, b)).second;
        policy.set_action(hist, a);
        if (h + 1 >= m.base.H) return;
        const auto& base = m.base;
        Vec next(base.S, 0.0);
        for (int s = 0; s < base.S; ++s) {
            if (b[s] == 0.0) continue;
            const Vec& tr = base.transition(h, s, a);
            for (int sp = 0; sp < base.S; ++sp) next[sp] += b[s] * tr[sp];
        }
        hist.push_back(a);
        for (int o = 0; o < base.O; ++o) {
            Vec posterior(base.S);
            double p_o = 0.0;
            for (int s = 0; s < base.S; ++s) {
                posterior[s] = next[s] * base.emission(h + 1, s)[o];
                p_o += posterior[s];
            }
            if (p_o == 0.0) continue;  // unreachable under the model
            for (int s = 0; s < base.S; ++s) posterior[s] /= p_o;
            hist.push_back(o);
            extract(h + 1, posterior, hist, policy);
            hist.pop_back();
        }
        hist.pop_back();
    }
};

}  // namespace detail

// Exact optimal planning over first-slot-history policies by backward
// induction on the belief tree. Ties between actions are broken by action
// index, or uniformly at random when a tie-break generator is supplied (the
// returned policy is optimal either way). Refuses instances whose history
// tree exceeds the node cap.
inline PlanResult pop_exact(const LatentRewardPOMDP& m,
                            long long node_cap = kDefaultHistoryNodeCap, Rng* tie_rng = nullptr) {
    m.check();
    momdp::detail::check_history_tree_cap(m.base, node_cap);
    detail::ExactPlanner planner{m, tie_rng, {}};

    const auto& base = m.base;
    PlanResult result;
    result.policy = HistoryPolicy::uniform(base.A);
    double value = 0.0;
    History hist;
    for (int o = 0; o < base.O; ++o) {
        Vec posterior(base.S);
        double p_o = 0.0;
        for (int s = 0; s < base.S; ++s) {
            posterior[s] = base.d0[s] * base.emission(0, s)[o];
            p_o += posterior[s];
        }
        if (p_o == 0.0) continue;
        for (int s = 0; s < base.S; ++s) posterior[s] /= p_o;
        value += p_o * planner.best(0, posterior).first;
        hist.push_back(o);
        planner.extract(0, posterior, hist, result.policy);
        hist.pop_back();
    }
    result.value = value;
    return result;
}

// QMDP-style heuristic: value iteration on the latent MDP, actions chosen by
// belief-weighted Q values along the realized history. The reported value is
// the exact evaluation of the produced policy, never the MDP upper bound.
// Documented fallback; acceptance runs use pop_exact.
inline PlanResult pop_qmdp(const LatentRewardPOMDP& m,
                           long long eval_node_cap = kDefaultHistoryNodeCap) {
    m.check();
    const auto base = m.base;
    const auto r = m.r;
    const int H = base.H, S = base.S, A = base.A;

    // Q[h][s][a] under full observability of the latent state.
    std::vector<std::vector<Vec>> Q(H, std::vector<Vec>(S, Vec(A, 0.0)));
    Vec next_v(S, 0.0);
    for (int h = H - 1; h >= 0; --h) {
        Vec v(S, 0.0);
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                double q = r[h][s][a];
                if (h + 1 < H) {
                    const Vec& tr = base.transition(h, s, a);
                    for (int sp = 0; sp < S; ++sp) q += tr[sp] * next_v[sp];
                }
                Q[h][s][a] = q;
            }
            v[s] = *std::max_element(Q[h][s].begin(), Q[h][s].end());
        }
        next_v = v;
    }

    auto policy = HistoryPolicy::from_callable(A, [base, Q](const History& hist) {
        const int S = base.S, A = base.A;
        // forward belief filter over the realized first-slot history
        Vec b(S);
        int h = 0;
        double norm = 0.0;
        for (int s = 0; s < S; ++s) {
            b[s] = base.d0[s] * base.emission(0, s)[hist[0]];
            norm += b[s];
        }
        if (norm > 0) {
            for (auto& x : b) x /= norm;
        } else {
            b.assign(S, 1.0 / S);
        }
        for (size_t i = 1; i + 1 < hist.size(); i += 2) {
            const int a = hist[i], o = hist[i + 1];
            Vec nb(S, 0.0);
            for (int s = 0; s < S; ++s) {
                if (b[s] == 0.0) continue;
                const Vec& tr = base.transition(h, s, a);
                for (int sp = 0; sp < S; ++sp) nb[sp] += b[s] * tr[sp];
            }
            ++h;
            norm = 0.0;
            for (int s = 0; s < S; ++s) {
                nb[s] *= base.emission(h, s)[o];
                norm += nb[s];
            }
            if (norm > 0) {
                for (auto& x : nb) x /= norm;
            } else {
                nb.assign(S, 1.0 / S);
            }
            b = std::move(nb);
        }
        int best_a = 0;
        double best_q = -1.0;
        for (int a = 0; a < A; ++a) {
            double q = 0.0;
            for (int s = 0; s < S; ++s) q += b[s] * Q[h][s][a];
            if (q > best_q) {
                best_q = q;
                best_a = a;
            }
        }
        Vec dist(A, 0.0);
        dist[best_a] = 1.0;
        return dist;
    });

    PlanResult result;
    result.value = evaluate_policy_latent(m, policy, eval_node_cap);
    result.policy = std::move(policy);
    return result;
}

}  // namespace momdp::planner
