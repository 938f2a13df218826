#include <doctest.h>

#include <cmath>

#include "momdp/envs.hpp"
#include "momdp/planner.hpp"
#include "oracles.hpp"

using namespace momdp;
using namespace momdp::planner;

namespace {

LatentRewardPOMDP lock_with_latent_reward(int H, int A, const std::vector<int>& good) {
    LatentRewardPOMDP m;
    m.base = envs::make_combination_lock_explicit(H, A, good);
    m.r.assign(H, std::vector<Vec>(2, Vec(A, 0.0)));
    for (int a = 0; a < A; ++a) m.r[H - 1][0][a] = 1.0;  // reward for being in the good state
    return m;
}

LatentRewardPOMDP random_latent(int S, int A, int O, int H, std::uint64_t seed) {
    LatentRewardPOMDP m;
    m.base = envs::make_random_distinguishable(S, A, O, H, 0.0, seed).model;
    Rng rng(seed, 0xabc);
    m.r.assign(H, std::vector<Vec>(S, Vec(A, 0.0)));
    for (auto& step : m.r)
        for (auto& row : step)
            for (auto& v : row) v = rng.uniform();
    return m;
}

}  // namespace

TEST_CASE("pop_exact opens the combination lock with latent rewards") {
    const std::vector<int> good = {1, 0, 1};
    const auto m = lock_with_latent_reward(4, 2, good);
    const auto plan = pop_exact(m);
    CHECK(plan.value == doctest::Approx(1.0).epsilon(1e-12));
    // the returned policy must realize the plan value on the same model
    CHECK(evaluate_policy_latent(m, plan.policy) == doctest::Approx(plan.value).epsilon(1e-9));
    // and the good sequence is what it plays: check along any realized history
    History hist = {0};
    for (int h = 0; h < 3; ++h) {
        const auto dist = plan.policy.action_dist(hist);
        CHECK(dist[good[h]] == doctest::Approx(1.0));
        hist.push_back(good[h]);
        hist.push_back(1);  // observations at h < H carry no information
    }
}

TEST_CASE("pop_exact at H=1 with uninformative emissions reduces to argmax") {
    LatentRewardPOMDP m;
    m.base.S = 2;
    m.base.A = 3;
    m.base.O = 2;
    m.base.H = 1;
    m.base.d0 = {0.3, 0.7};
    m.base.T.assign(1, std::vector<std::vector<Vec>>(2, std::vector<Vec>(3, Vec{0.5, 0.5})));
    m.base.E.assign(1, std::vector<Vec>(2, Vec{0.5, 0.5}));
    m.base.r.assign(1, Vec{0.0, 0.0});
    m.r.assign(1, {Vec{0.1, 0.9, 0.4}, Vec{0.8, 0.2, 0.4}});
    // expected: max_a 0.3*r(s0,a) + 0.7*r(s1,a) = max(0.59, 0.41, 0.4)
    const auto plan = pop_exact(m);
    CHECK(plan.value == doctest::Approx(0.59).epsilon(1e-12));
}

TEST_CASE("pop_exact matches brute-force policy enumeration") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto m = random_latent(2, 2, 2, 2, 100 + seed);
        const auto plan = pop_exact(m);
        const double brute = oracles::best_deterministic_policy_value(
            m.base, [&m](const HistoryPolicy& pi) { return evaluate_policy_latent(m, pi); });
        CHECK(plan.value == doctest::Approx(brute).epsilon(1e-9));
        CHECK(evaluate_policy_latent(m, plan.policy) == doctest::Approx(plan.value).epsilon(1e-9));
    }
}

TEST_CASE("pop_exact value is achievable and monotone in rewards") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        auto m = random_latent(3, 2, 3, 2, 200 + seed);
        const auto base_plan = pop_exact(m);
        CHECK(evaluate_policy_latent(m, base_plan.policy) ==
              doctest::Approx(base_plan.value).epsilon(1e-9));
        // raise one reward entry; the optimum cannot decrease
        Rng rng(seed);
        auto& cell = m.r[rng.bounded(2)][rng.bounded(3)][rng.bounded(2)];
        cell = std::min(1.0, cell + 0.3);
        const auto bumped = pop_exact(m);
        CHECK(bumped.value >= base_plan.value - 1e-9);
    }
}

TEST_CASE("pop_exact random tie-breaking still returns an optimal policy") {
    // all rewards equal: every policy is optimal; value must be exact anyway
    auto m = random_latent(2, 2, 2, 2, 42);
    for (auto& step : m.r)
        for (auto& row : step) std::fill(row.begin(), row.end(), 0.5);
    Rng tie(7);
    const auto plan = pop_exact(m, kDefaultHistoryNodeCap, &tie);
    CHECK(plan.value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(evaluate_policy_latent(m, plan.policy) == doctest::Approx(plan.value).epsilon(1e-9));
}

TEST_CASE("pop_exact refuses oversized trees and suggests the heuristic") {
    const auto m = random_latent(2, 4, 4, 12, 3);
    CHECK_THROWS_AS(static_cast<void>(pop_exact(m)), std::runtime_error);
}

TEST_CASE("pop_qmdp matches pop_exact on fully observable models") {
    // identity emissions make beliefs point masses
    LatentRewardPOMDP m;
    m.base.S = 2;
    m.base.A = 2;
    m.base.O = 2;
    m.base.H = 3;
    m.base.d0 = {0.5, 0.5};
    m.base.T.assign(3, std::vector<std::vector<Vec>>(2, std::vector<Vec>(2)));
    for (int h = 0; h < 3; ++h) {
        m.base.T[h][0] = {Vec{1.0, 0.0}, Vec{0.0, 1.0}};
        m.base.T[h][1] = {Vec{0.0, 1.0}, Vec{1.0, 0.0}};
    }
    m.base.E.assign(3, {Vec{1.0, 0.0}, Vec{0.0, 1.0}});
    m.base.r.assign(3, Vec{0.0, 0.0});
    m.r.assign(3, {Vec{0.2, 0.7}, Vec{0.9, 0.1}});
    const auto exact = pop_exact(m);
    const auto qmdp = pop_qmdp(m);
    CHECK(qmdp.value == doctest::Approx(exact.value).epsilon(1e-9));
}

TEST_CASE("pop_qmdp never beats pop_exact") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const auto m = random_latent(2 + seed % 2, 2, 2, 2, 300 + seed);
        const auto exact = pop_exact(m);
        const auto qmdp = pop_qmdp(m);
        CHECK(qmdp.value <= exact.value + 1e-9);
    }
}

TEST_CASE("latent reward validation") {
    auto m = random_latent(2, 2, 2, 2, 1);
    m.r[0][0][0] = 1.5;  // above r_max
    CHECK_THROWS(m.check());
}

TEST_CASE("from_observation_rewards averages the reward over emissions") {
    auto base = envs::make_random_distinguishable(2, 2, 2, 1, 0.0, 9).model;
    base.r[0] = {0.2, 0.8};
    base.E[0][0] = {0.75, 0.25};
    const auto m = from_observation_rewards(base);
    CHECK(m.r[0][0][0] == doctest::Approx(0.75 * 0.2 + 0.25 * 0.8));
    CHECK(m.r[0][0][1] == doctest::Approx(m.r[0][0][0]));
}
