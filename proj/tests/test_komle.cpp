#include <doctest.h>

#include <cmath>

#include "momdp/envs.hpp"
#include "momdp/komle.hpp"
#include "oracles.hpp"

using namespace momdp;
using namespace momdp::komle;

namespace {

// lock candidate class: one model per possible good-action sequence
ModelClass lock_class(int H, int A, double beta) {
    ModelClass mc;
    std::vector<int> seq(H - 1, 0);
    while (true) {
        mc.models.push_back(envs::make_combination_lock_explicit(H, A, seq));
        int i = H - 2;
        while (i >= 0 && seq[i] == A - 1) seq[i--] = 0;
        if (i < 0) break;
        ++seq[i];
    }
    mc.beta = beta;
    return mc;
}

TabularPOMDP perturb_emissions(TabularPOMDP m, double eps) {
    // move eps/2 mass between the first two observations in every row
    for (auto& step : m.E) {
        for (auto& row : step) {
            const double moved = std::min({eps / 2.0, row[1], 1.0 - row[0]});
            row[0] += moved;
            row[1] -= moved;
        }
    }
    return m;
}

}  // namespace

TEST_CASE("exploration policies: uniform head and tails") {
    const auto env = envs::make_random_distinguishable(2, 3, 2, 3, 0.0, 5).model;
    auto base = HistoryPolicy::open_loop(3, {2, 2, 2});
    const auto expl = exploration_policies(base, 3, 3);
    REQUIRE(expl.size() == 3);

    // h = 1: uniform everywhere
    CHECK(expl[0].action_dist({0}) == Vec{1.0 / 3, 1.0 / 3, 1.0 / 3});
    CHECK(expl[0].action_dist({0, 1, 1}) == Vec{1.0 / 3, 1.0 / 3, 1.0 / 3});
    // h = H: follows pi through H-1, uniform at H
    CHECK(expl[2].action_dist({0})[2] == doctest::Approx(1.0));
    CHECK(expl[2].action_dist({0, 2, 1})[2] == doctest::Approx(1.0));
    CHECK(expl[2].action_dist({0, 2, 1, 2, 0}) == Vec{1.0 / 3, 1.0 / 3, 1.0 / 3});
    // the action marginal at the uniform step is exactly 1/A regardless of history
    CHECK(expl[1].action_dist({1, 0, 1}) == Vec{1.0 / 3, 1.0 / 3, 1.0 / 3});
}

TEST_CASE("confidence set: singleton class always survives") {
    ModelClass mc;
    mc.models.push_back(envs::make_random_distinguishable(2, 2, 2, 2, 0.0, 1).model);
    mc.beta = 0.0;
    const auto cs = update_confidence_set(mc, {-12.5}, mc.beta);
    CHECK(cs.members == std::vector<int>{0});
}

TEST_CASE("confidence set: beta = 0 keeps exactly the argmax set") {
    ModelClass mc;
    for (int i = 0; i < 3; ++i) {
        mc.models.push_back(envs::make_random_distinguishable(2, 2, 2, 2, 0.0, 10 + i).model);
    }
    mc.beta = 0.0;
    const auto cs = update_confidence_set(mc, {-5.0, -4.0, -4.0}, 0.0);
    CHECK(cs.members == std::vector<int>{1, 2});
}

TEST_CASE("confidence set: impossible dataset raises a diagnostic") {
    ModelClass mc;
    mc.models.push_back(envs::make_random_distinguishable(2, 2, 2, 2, 0.0, 1).model);
    mc.beta = 1.0;
    const double neg_inf = -std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH_AS(static_cast<void>(update_confidence_set(mc, {neg_inf}, 1.0)),
                         doctest::Contains("impossible"), std::runtime_error);
}

TEST_CASE("likelihood separation excludes a 0.2-perturbed candidate") {
    // three observations per step in hindsight: the k-fold emission factors
    // triple the per-episode log-likelihood drift against the perturbed model
    const auto truth = envs::make_random_distinguishable(2, 2, 2, 2, 0.6, 33).model;
    ModelClass mc;
    mc.models = {truth, perturb_emissions(truth, 0.2)};
    mc.truth_index = 0;
    const double delta = 0.05;
    mc.beta = std::log(mc.models.size() / delta);

    const auto uniform = HistoryPolicy::uniform(2);
    int excluded = 0;
    const int runs = 40, episodes = 200;
    for (int run = 0; run < runs; ++run) {
        Rng rng(5000 + run);
        std::vector<double> loglik(2, 0.0);
        for (int e = 0; e < episodes; ++e) {
            const auto traj = simulate_episode(truth, uniform, 3, rng);
            for (int j = 0; j < 2; ++j) {
                loglik[j] += trajectory_log_likelihood(mc.models[j], uniform, traj);
            }
        }
        const auto cs = update_confidence_set(mc, loglik, mc.beta);
        if (!cs.contains(1)) ++excluded;
    }
    CHECK(excluded >= static_cast<int>(0.95 * runs));
}

TEST_CASE("optimistic selection takes the most promising survivor") {
    // two lock candidates: both promise value 1; ties break by index
    auto mc = lock_class(2, 2, 1.0);
    OptimisticSelector sel(mc);
    ConfidenceSet cs;
    cs.members = {0, 1};
    const auto pick = sel.select(cs);
    CHECK(pick.index == 0);
    CHECK(pick.value == doctest::Approx(1.0));
    ConfidenceSet only1;
    only1.members = {1};
    CHECK(sel.select(only1).index == 1);
}

TEST_CASE("run_komle with the singleton class is optimal from iteration 1") {
    const auto env = envs::make_random_distinguishable(2, 2, 2, 2, 0.5, 8).model;
    ModelClass mc;
    mc.models = {env};
    mc.truth_index = 0;
    mc.beta = beta_finite_class(1, 5, 0.1);
    KomleConfig cfg;
    cfg.T = 5;
    cfg.k = 2;
    const auto res = run_komle(env, mc, cfg, 3);
    REQUIRE(res.iterations_run == 5);
    for (const auto& row : res.trace) {
        CHECK(row.oracle_value == doctest::Approx(res.v_star).epsilon(1e-9));
        CHECK(row.confset_size == 1);
    }
    CHECK(res.truth_always_retained);
}

TEST_CASE("run_komle solves the combination lock by elimination") {
    const auto env = envs::make_combination_lock(3, 2, 99);
    auto mc = lock_class(3, 2, beta_finite_class(4, 12, 0.05));
    // find the truth index for retention bookkeeping
    for (size_t i = 0; i < mc.models.size(); ++i) {
        if (mc.models[i].T == env.T) mc.truth_index = static_cast<int>(i);
    }
    REQUIRE(mc.truth_index >= 0);
    KomleConfig cfg;
    cfg.T = 12;
    cfg.k = 2;
    const auto res = run_komle(env, mc, cfg, 17);
    CHECK(res.final_value == doctest::Approx(1.0));
    CHECK(res.truth_always_retained);
    // optimism: the selected promise never falls below the truth's optimum
    for (const auto& row : res.trace) CHECK(row.optimistic_value >= res.v_star - 1e-9);
}

TEST_CASE("run_komle dataset and sample accounting") {
    const auto env = envs::make_random_distinguishable(2, 2, 2, 3, 0.0, 12).model;
    ModelClass mc;
    mc.models = {env};
    mc.beta = 1.0;
    KomleConfig cfg;
    cfg.T = 7;
    cfg.k = 4;
    cfg.oracle_eval = false;
    const auto res = run_komle(env, mc, cfg, 4);
    CHECK(res.episodes_used == 7 * 3);            // H policies per iteration
    CHECK(res.observations_used == 7 * 3 * 3 * 4);  // T * H policies * H steps * k
}

TEST_CASE("run_komle with a sub-iteration episode budget returns the uniform policy") {
    const auto env = envs::make_combination_lock(4, 2, 2);
    auto mc = lock_class(4, 2, 1.0);
    KomleConfig cfg;
    cfg.T = 10;
    cfg.k = 1;
    cfg.episode_budget = 1;  // less than H = 4: no complete iteration
    const auto res = run_komle(env, mc, cfg, 9);
    CHECK(res.iterations_run == 0);
    CHECK(res.final_value == doctest::Approx(std::pow(2.0, -3)));
}

TEST_CASE("run_komle is deterministic given the seed") {
    const auto env = envs::make_random_distinguishable(2, 2, 2, 2, 0.4, 23).model;
    ModelClass mc;
    mc.models = {env, perturb_emissions(env, 0.15)};
    mc.truth_index = 0;
    mc.beta = beta_finite_class(2, 20, 0.1);
    KomleConfig cfg;
    cfg.T = 20;
    cfg.k = 2;
    const auto a = run_komle(env, mc, cfg, 77);
    const auto b = run_komle(env, mc, cfg, 77);
    REQUIRE(a.trace.size() == b.trace.size());
    for (size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].oracle_value == b.trace[i].oracle_value);
        CHECK(a.trace[i].confset_size == b.trace[i].confset_size);
    }
}

TEST_CASE("beta helpers") {
    CHECK(beta_finite_class(8, 100, 0.1) == doctest::Approx(std::log(8.0 * 100 / 0.1)));
    CHECK(beta_tabular(2, 2, 2, 3, 0.1) ==
          doctest::Approx(3 * (8.0 + 4.0) + std::log(10.0)));
}
