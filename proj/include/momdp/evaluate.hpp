#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "momdp/policy.hpp"
#include "momdp/pomdp.hpp"

namespace momdp {

constexpr long long kDefaultHistoryNodeCap = 10'000'000;

namespace detail {

inline void check_history_tree_cap(const TabularPOMDP& m, long long cap) {
    long double nodes = 1.0L;
    long double total = 0.0L;
    for (int h = 0; h < m.H; ++h) {
        nodes *= static_cast<long double>(m.O) * m.A;
        total += nodes;
        if (total > static_cast<long double>(cap)) {
            throw std::runtime_error("history tree exceeds node cap (" + std::to_string(cap) +
                                     "): (O*A)^H is too large for exact evaluation");
        }
    }
}

// Shared exact recursion for policy evaluation. `w` carries the joint
// probability of (reaching this history node, latent state); reward_fn is
// called once per (h, s, a, o) with that joint weight already applied.
template <class RewardFn>
double evaluate_recursive(const TabularPOMDP& m, const HistoryPolicy& policy, RewardFn&& reward_fn,
                          int h, const Vec& w, History& hist) {
    double total = 0.0;
    Vec w_o(m.S), w_next(m.S);
    for (int o = 0; o < m.O; ++o) {
        double p_o = 0.0;
        for (int s = 0; s < m.S; ++s) {
            w_o[s] = w[s] * m.emission(h, s)[o];
            p_o += w_o[s];
        }
        if (p_o == 0.0) continue;
        hist.push_back(o);
        const Vec dist = policy.action_dist(hist);
        for (int a = 0; a < m.A; ++a) {
            if (dist[a] == 0.0) continue;
            for (int s = 0; s < m.S; ++s) {
                if (w_o[s] != 0.0) total += dist[a] * w_o[s] * reward_fn(h, s, a, o);
            }
            if (h + 1 < m.H) {
                std::fill(w_next.begin(), w_next.end(), 0.0);
                for (int s = 0; s < m.S; ++s) {
                    if (w_o[s] == 0.0) continue;
                    const Vec& tr = m.transition(h, s, a);
                    const double scale = dist[a] * w_o[s];
                    for (int sp = 0; sp < m.S; ++sp) w_next[sp] += scale * tr[sp];
                }
                hist.push_back(a);
                total += evaluate_recursive(m, policy, reward_fn, h + 1, w_next, hist);
                hist.pop_back();
            }
        }
        hist.pop_back();
    }
    return total;
}

template <class RewardFn>
double evaluate_policy_impl(const TabularPOMDP& m, const HistoryPolicy& policy, RewardFn&& reward_fn,
                            long long node_cap) {
    check_history_tree_cap(m, node_cap);
    History hist;
    hist.reserve(2 * m.H);
    return evaluate_recursive(m, policy, reward_fn, 0, m.d0, hist);
}

}  // namespace detail

// Exact V_theta(pi) by dynamic programming over the full first-slot history
// tree. Exponential in H; intended for desk-scale instances and refuses
// anything whose history tree exceeds the node cap.
inline double evaluate_policy(const TabularPOMDP& m, const HistoryPolicy& policy,
                              long long node_cap = kDefaultHistoryNodeCap) {
    validate_or_throw(m);
    return detail::evaluate_policy_impl(
        m, policy, [&m](int h, int /*s*/, int /*a*/, int o) { return m.reward(h, o); }, node_cap);
}

}  // namespace momdp
