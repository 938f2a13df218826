#pragma once

#include <stdexcept>
#include <vector>

namespace momdp {

// One episode under k-observation feedback: per step, the action taken and a
// block of k observations whose first entry is the in-episode observation (the
// remaining k-1 were emitted in hindsight from the same latent state). Hidden
// states are populated only when the simulator runs in oracle mode; learners
// never read them, tests may.
struct KObsTrajectory {
    int k = 1;
    int H = 0;
    std::vector<int> actions;                 // length H
    std::vector<std::vector<int>> obs;        // [h] -> block of k observation indices
    std::vector<int> hidden_states;           // empty unless oracle mode
    bool has_hidden() const { return !hidden_states.empty(); }

    int first_obs(int h) const { return obs[h][0]; }

    void check_shape() const {
        if (static_cast<int>(actions.size()) != H || static_cast<int>(obs.size()) != H) {
            throw std::invalid_argument("trajectory has wrong horizon");
        }
        for (const auto& block : obs) {
            if (static_cast<int>(block.size()) != k) {
                throw std::invalid_argument("observation block has wrong length");
            }
        }
    }
};

}  // namespace momdp
