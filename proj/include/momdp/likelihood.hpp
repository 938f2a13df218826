#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "momdp/policy.hpp"
#include "momdp/pomdp.hpp"
#include "momdp/trajectory.hpp"

namespace momdp {

// log P_theta^pi(tau_k): forward recursion over latent states where the
// per-step emission weight is the k-fold product of the block's observation
// probabilities (the augmented emission of the k-observation feedback view).
// Policy probabilities are included; they are identical across models at a
// fixed policy, so likelihood comparisons across theta are unaffected.
// Returns -infinity when the trajectory has probability zero under the model.
inline double trajectory_log_likelihood(const TabularPOMDP& model, const HistoryPolicy& policy,
                                        const KObsTrajectory& traj) {
    if (traj.H != model.H) throw std::invalid_argument("trajectory horizon does not match model");
    traj.check_shape();
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();

    Vec alpha(model.S);
    double log_scale = 0.0;
    History hist;
    hist.reserve(2 * model.H);

    for (int s = 0; s < model.S; ++s) alpha[s] = model.d0[s];
    for (int h = 0; h < model.H; ++h) {
        for (int s = 0; s < model.S; ++s) {
            if (alpha[s] == 0.0) continue;
            const Vec& em = model.emission(h, s);
            double w = 1.0;
            for (int o : traj.obs[h]) w *= em[o];
            alpha[s] *= w;
        }
        hist.push_back(traj.first_obs(h));
        const double pa = policy.action_dist(hist)[traj.actions[h]];
        hist.push_back(traj.actions[h]);

        double total = 0.0;
        for (double x : alpha) total += x;
        if (total == 0.0 || pa == 0.0) return neg_inf;
        log_scale += std::log(total) + std::log(pa);
        for (double& x : alpha) x /= total;

        if (h + 1 < model.H) {
            Vec next(model.S, 0.0);
            const int a = traj.actions[h];
            for (int s = 0; s < model.S; ++s) {
                if (alpha[s] == 0.0) continue;
                const Vec& tr = model.transition(h, s, a);
                for (int sp = 0; sp < model.S; ++sp) next[sp] += alpha[s] * tr[sp];
            }
            alpha.swap(next);
        }
    }
    return log_scale;
}

}  // namespace momdp
