#include <doctest.h>

#include <cmath>
#include <numeric>

#include "momdp/dist_testing.hpp"
#include "momdp/envs.hpp"
#include "oracles.hpp"

using namespace momdp;
using namespace momdp::dist_testing;

namespace {

std::vector<int> draw_samples(const Vec& p, long long k, Rng& rng) {
    CategoricalDist dist(p);
    std::vector<int> out(k);
    for (auto& o : out) o = dist.sample(rng);
    return out;
}

// The adversarial pair used throughout calibration: uniform vs uniform with
// +/- alpha/O mass moved between the two halves (l1 distance exactly alpha).
std::pair<Vec, Vec> adversarial_pair(int O, double alpha) {
    Vec p(O, 1.0 / O), q(O);
    for (int o = 0; o < O; ++o) q[o] = (o < O / 2 ? 1.0 + alpha : 1.0 - alpha) / O;
    for (auto& x : q) x /= O * 0.0 + 1.0;  // already normalized; keep explicit
    double sum = std::accumulate(q.begin(), q.end(), 0.0);
    for (auto& x : q) x /= sum;
    return {p, q};
}

}  // namespace

TEST_CASE("closeness test accepts identical distributions at the calibrated budget") {
    const int O = 2;
    const double alpha = 1.0, delta = 0.1;
    const long long k = closeness_budget(O, alpha, delta, pinned_c1());
    const auto [p, q] = adversarial_pair(O, alpha);
    TestConfig cfg;
    cfg.delta = delta;
    cfg.trace = TraceLevel::none;
    Rng rng(1);
    int rejects = 0;
    const int trials = 400;
    for (int t = 0; t < trials; ++t) {
        const auto x = draw_samples(p, k, rng);
        const auto y = draw_samples(p, k, rng);
        if (!closeness_test(x, y, cfg, rng).accepted()) ++rejects;
    }
    CHECK(rejects <= trials * delta + 3 * std::sqrt(trials * delta * (1 - delta)));
}

TEST_CASE("closeness test rejects the adversarial far pair at the calibrated budget") {
    const int O = 2;
    const double alpha = 1.0, delta = 0.1;
    const long long k = closeness_budget(O, alpha, delta, pinned_c1());
    const auto [p, q] = adversarial_pair(O, alpha);
    TestConfig cfg;
    cfg.delta = delta;
    cfg.trace = TraceLevel::none;
    Rng rng(2);
    int accepts = 0;
    const int trials = 400;
    for (int t = 0; t < trials; ++t) {
        const auto x = draw_samples(p, k, rng);
        const auto y = draw_samples(q, k, rng);
        if (closeness_test(x, y, cfg, rng).accepted()) ++accepts;
    }
    CHECK(accepts <= trials * delta + 3 * std::sqrt(trials * delta * (1 - delta)));
}

TEST_CASE("disjoint point masses force a closed-form reject") {
    // stat = 2*N_j - 2 for opposite point masses, above sqrt(3*N_j) once N_j >= 3
    const long long k = 64;
    std::vector<int> x(k, 0), y(k, 1);
    TestConfig cfg;
    cfg.M = 4;  // blocks of ~16
    cfg.trace = TraceLevel::stats;
    Rng rng(3);
    const auto res = closeness_test(x, y, cfg, rng);
    CHECK(res.verdict == TestVerdict::reject);
    for (const auto& b : res.blocks) {
        if (b.size >= 3) {
            CHECK(b.statistic == doctest::Approx(2.0 * b.size - 2.0));
            CHECK(b.vote == 0);
        }
    }
}

TEST_CASE("overshoot with fallback disabled eventually fails") {
    // With k = M the Poisson total Poi(k) overshoots k roughly half the time;
    // four attempts in a row keep failing with probability ~ 2^-4.
    TestConfig cfg;
    cfg.M = 8;
    cfg.retries = 3;
    cfg.fallback = false;
    cfg.trace = TraceLevel::none;
    std::vector<int> x(8, 0), y(8, 0);
    Rng rng(4);
    int fails = 0;
    const int trials = 3000;
    for (int t = 0; t < trials; ++t) {
        if (closeness_test(x, y, cfg, rng).verdict == TestVerdict::fail) ++fails;
    }
    // Poisson tail: P(Poi(8) > 8) ~ 0.4075 -> fail rate ~ 0.4075^4 ~ 0.0276
    const double p_over = 0.40745;
    const double expected = std::pow(p_over, 4);
    CHECK(fails > 0);
    CHECK(std::fabs(fails / double(trials) - expected) <
          4 * std::sqrt(expected * (1 - expected) / trials) + 0.002);
}

TEST_CASE("fallback keeps the budget and prevents fail verdicts") {
    TestConfig cfg;
    cfg.M = 8;
    cfg.retries = 0;
    cfg.fallback = true;
    cfg.trace = TraceLevel::none;
    std::vector<int> x(8, 0), y(8, 0);
    Rng rng(5);
    for (int t = 0; t < 500; ++t) {
        const auto res = closeness_test(x, y, cfg, rng);
        CHECK(res.verdict != TestVerdict::fail);
        CHECK(res.samples_used <= 8);
    }
}

TEST_CASE("closeness test is symmetric under a shared partition") {
    Rng rng(6);
    const auto p = dirichlet_uniform(4, rng);
    const auto q = dirichlet_uniform(4, rng);
    TestConfig cfg;
    cfg.trace = TraceLevel::none;
    for (int t = 0; t < 50; ++t) {
        const auto x = draw_samples(p, 200, rng);
        const auto y = draw_samples(q, 200, rng);
        Rng r1(900 + t), r2(900 + t);
        const auto a = closeness_test(x, y, cfg, r1);
        const auto b = closeness_test(y, x, cfg, r2);
        CHECK(a.verdict == b.verdict);
        CHECK(a.votes_accept == b.votes_accept);
    }
}

TEST_CASE("closeness reject rate is monotone in k on a fixed far pair") {
    const auto [p, q] = adversarial_pair(4, 0.8);
    TestConfig cfg;
    cfg.delta = 0.2;
    cfg.trace = TraceLevel::none;
    Rng rng(7);
    const int trials = 300;
    double prev_rate = -1.0;
    for (long long k : {200, 800, 3200}) {
        int rejects = 0;
        for (int t = 0; t < trials; ++t) {
            const auto x = draw_samples(p, k, rng);
            const auto y = draw_samples(q, k, rng);
            if (!closeness_test(x, y, cfg, rng).accepted()) ++rejects;
        }
        const double rate = rejects / double(trials);
        if (prev_rate >= 0.0) {
            CHECK(rate >= prev_rate - std::sqrt(prev_rate * (1 - prev_rate) / trials) - 0.03);
        }
        prev_rate = rate;
    }
}

TEST_CASE("mismatched sample lengths are rejected") {
    std::vector<int> x(10, 0), y(11, 0);
    TestConfig cfg;
    Rng rng(8);
    CHECK_THROWS(closeness_test(x, y, cfg, rng));
    cfg.alpha = 0.5;
    CHECK_THROWS(identity_test(x, Vec{0.5, 0.5}, [&] { TestConfig c = cfg; c.k = 11; return c; }(), rng));
}

TEST_CASE("identity test accepts its own distribution at the calibrated budget") {
    const int O = 4;
    const double alpha = 0.5, delta = 0.1;
    const long long k = identity_budget(O, alpha, delta, pinned_c1());
    Rng rng(9);
    const auto q = dirichlet_uniform(O, rng);
    TestConfig cfg;
    cfg.delta = delta;
    cfg.alpha = alpha;
    cfg.trace = TraceLevel::none;
    int rejects = 0;
    const int trials = 300;
    for (int t = 0; t < trials; ++t) {
        const auto x = draw_samples(q, k, rng);
        if (!identity_test(x, q, cfg, rng).accepted()) ++rejects;
    }
    CHECK(rejects <= trials * delta + 3 * std::sqrt(trials * delta * (1 - delta)));
}

TEST_CASE("identity test: point mass against the uniform reference") {
    // q uniform on 2 symbols, all samples o1: C = N - 2 per block, threshold N/10
    const long long k = 400;
    std::vector<int> x(k, 0);
    TestConfig cfg;
    cfg.alpha = 1.0;
    cfg.M = 4;
    cfg.trace = TraceLevel::stats;
    Rng rng(10);
    const auto res = identity_test(x, Vec{0.5, 0.5}, cfg, rng);
    CHECK(res.verdict == TestVerdict::reject);
    for (const auto& b : res.blocks) {
        if (b.size >= 20) {
            CHECK(b.statistic == doctest::Approx(b.size - 2.0).epsilon(1e-9));
            CHECK(b.vote == 0);
        }
    }
}

TEST_CASE("identity test rejects invalid references and parameters") {
    std::vector<int> x(10, 0);
    TestConfig cfg;
    cfg.alpha = 0.5;
    Rng rng(11);
    CHECK_THROWS(identity_test(x, Vec{0.5, 0.4}, cfg, rng));
    cfg.alpha = 0.0;
    CHECK_THROWS(identity_test(x, Vec{0.5, 0.5}, cfg, rng));
}

TEST_CASE("degenerate blocks are flagged and vote accept") {
    // k much smaller than M: most blocks are empty (0/0 -> term dropped, ties accept)
    std::vector<int> x(3, 0), y(3, 1);
    TestConfig cfg;
    cfg.M = 24;
    cfg.trace = TraceLevel::stats;
    Rng rng(12);
    const auto res = closeness_test(x, y, cfg, rng);
    bool any_degenerate = false;
    for (const auto& b : res.blocks) {
        if (b.size == 0) {
            any_degenerate = true;
            CHECK(b.degenerate);
            CHECK(b.vote == 1);
            CHECK(b.statistic == doctest::Approx(0.0));
        }
    }
    CHECK(any_degenerate);
}

TEST_CASE("state tester with point-mass emissions is an exact indicator at k=1") {
    TabularPOMDP m;
    m.S = 2;
    m.A = 1;
    m.O = 2;
    m.H = 1;
    m.d0 = {0.5, 0.5};
    m.T.assign(1, std::vector<std::vector<Vec>>(2, std::vector<Vec>(1, Vec(2, 0.5))));
    m.E.assign(1, {Vec{1.0, 0.0}, Vec{0.0, 1.0}});
    m.r.assign(1, Vec{0.0, 0.0});
    Rng rng(13);
    const auto z0 = dist_testing::state_identity_tester(m, 0, 0, 1, 0.25, rng, 1, true);
    std::vector<int> b0{0}, b1{1};
    CHECK(z0(b0));
    CHECK_FALSE(z0(b1));
}

TEST_CASE("state tester confusion rates at a swept budget") {
    // two states at l1 distance 0.4; measure both error modes at delta = 0.1
    TabularPOMDP m;
    m.S = 2;
    m.A = 1;
    m.O = 2;
    m.H = 1;
    m.d0 = {0.5, 0.5};
    m.T.assign(1, std::vector<std::vector<Vec>>(2, std::vector<Vec>(1, Vec(2, 0.5))));
    m.E.assign(1, {Vec{0.6, 0.4}, Vec{0.4, 0.6}});
    m.r.assign(1, Vec{0.0, 0.0});
    const double delta = 0.1;
    const long long k = identity_budget(2, 0.4, delta, pinned_c1());
    Rng rng(14);
    const auto z0 = dist_testing::state_identity_tester(m, 0, 0, k, delta, rng);
    CategoricalDist own(m.E[0][0]), other(m.E[0][1]);
    int miss_own = 0, miss_other = 0;
    const int trials = 200;
    std::vector<int> block(k);
    for (int t = 0; t < trials; ++t) {
        for (auto& o : block) o = own.sample(rng);
        if (!z0(block)) ++miss_own;
        for (auto& o : block) o = other.sample(rng);
        if (z0(block)) ++miss_other;
    }
    CHECK(miss_own <= trials * delta + 3 * std::sqrt(trials * delta * (1 - delta)));
    CHECK(miss_other <= trials * delta + 3 * std::sqrt(trials * delta * (1 - delta)));
    // cross-state blocks read "not this state" at least 90% of the time
    CHECK(trials - miss_other >= 0.9 * trials);
}

TEST_CASE("state tester refuses indistinguishable steps") {
    TabularPOMDP m;
    m.S = 2;
    m.A = 1;
    m.O = 2;
    m.H = 1;
    m.d0 = {0.5, 0.5};
    m.T.assign(1, std::vector<std::vector<Vec>>(2, std::vector<Vec>(1, Vec(2, 0.5))));
    m.E.assign(1, {Vec{0.5, 0.5}, Vec{0.5, 0.5}});
    m.r.assign(1, Vec{0.0, 0.0});
    Rng rng(15);
    CHECK_THROWS(dist_testing::state_identity_tester(m, 0, 0, 100, 0.1, rng));
}

TEST_CASE("budget helpers are monotone and match the stated forms") {
    const double c1 = 4.0;
    CHECK(closeness_budget(2, 1.0, 0.1, c1) ==
          static_cast<long long>(std::ceil(
              c1 * (std::sqrt(2.0) + std::pow(2.0, 2.0 / 3.0)) * std::log(10.0))));
    CHECK(closeness_budget(2, 0.5, 0.1, c1) > closeness_budget(2, 1.0, 0.1, c1));
    CHECK(closeness_budget(2, 1.0, 0.05, c1) > closeness_budget(2, 1.0, 0.1, c1));
    CHECK(identity_budget(4, 0.5, 0.1, c1) ==
          static_cast<long long>(std::ceil(c1 * (2.0 / 0.25) * std::log(10.0))));
    CHECK(ost_test_budget(2, 1.0, 3, 100, 2, 0.1, c1) > closeness_budget(2, 1.0, 0.1, c1));
}
