#pragma once

#include <stdexcept>

#include "momdp/policy.hpp"
#include "momdp/pomdp.hpp"
#include "momdp/rng.hpp"
#include "momdp/trajectory.hpp"

namespace momdp {

namespace detail {
inline int sample_dist(const Vec& dist, Rng& rng) {
    double u = rng.uniform();
    for (int i = 0; i + 1 < static_cast<int>(dist.size()); ++i) {
        u -= dist[i];
        if (u < 0.0) return i;
    }
    return static_cast<int>(dist.size()) - 1;
}
}  // namespace detail

// Runs one episode under the k-observation feedback protocol: the policy sees
// only the first-slot observation history; after the episode ends, k-1 extra
// observations per step are drawn i.i.d. from the emission of the latent state
// that was visited there. Oracle mode additionally records the latent states.
inline KObsTrajectory simulate_episode(const TabularPOMDP& model, const HistoryPolicy& policy,
                                       int k, Rng& rng, bool oracle_mode = false) {
    if (k < 1) throw std::invalid_argument("simulate_episode: k must be >= 1");
    validate_or_throw(model);

    KObsTrajectory traj;
    traj.k = k;
    traj.H = model.H;
    traj.actions.resize(model.H);
    traj.obs.assign(model.H, std::vector<int>(k));

    std::vector<int> states(model.H);
    History hist;
    hist.reserve(2 * model.H);

    int s = detail::sample_dist(model.d0, rng);
    for (int h = 0; h < model.H; ++h) {
        states[h] = s;
        const int o = detail::sample_dist(model.emission(h, s), rng);
        traj.obs[h][0] = o;
        hist.push_back(o);
        const int a = policy.sample_action(hist, rng);
        traj.actions[h] = a;
        hist.push_back(a);
        if (h + 1 < model.H) s = detail::sample_dist(model.transition(h, s, a), rng);
    }
    // Hindsight observations, drawn after the episode from the visited states.
    for (int h = 0; h < model.H; ++h) {
        const Vec& em = model.emission(h, states[h]);
        for (int i = 1; i < k; ++i) traj.obs[h][i] = detail::sample_dist(em, rng);
    }
    if (oracle_mode) traj.hidden_states = std::move(states);
    return traj;
}

}  // namespace momdp
