#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "momdp/pomdp.hpp"
#include "momdp/rng.hpp"

namespace momdp::envs {

// ---- combination lock -------------------------------------------------------
//
// Two states (good/bad), two observations. Emissions are uniform at every step
// before the last, so nothing about the latent state can be learned there no
// matter how many observations are collected; at the last step the state is
// observed directly. Reward 1 only for the good observation at step H, which
// requires taking the (hidden) good action at every step.

inline TabularPOMDP make_combination_lock_explicit(int H, int A,
                                                   const std::vector<int>& good_actions) {
    if (H < 2 || A < 2) throw std::invalid_argument("combination lock needs H >= 2 and A >= 2");
    if (static_cast<int>(good_actions.size()) != H - 1) {
        throw std::invalid_argument("combination lock needs H-1 good actions");
    }
    constexpr int kGood = 0, kBad = 1, kObsGood = 0, kObsBad = 1;
    TabularPOMDP m;
    m.S = 2;
    m.A = A;
    m.O = 2;
    m.H = H;
    m.d0 = {1.0, 0.0};  // starts in the good state
    m.T.assign(H, std::vector<std::vector<Vec>>(2, std::vector<Vec>(A, Vec(2, 0.0))));
    m.E.assign(H, std::vector<Vec>(2, Vec(2, 0.5)));
    m.r.assign(H, Vec(2, 0.0));

    for (int h = 0; h < H; ++h) {
        for (int a = 0; a < A; ++a) {
            const bool stay_good = h < H - 1 && a == good_actions[h];
            m.T[h][kGood][a][stay_good ? kGood : kBad] = 1.0;
            m.T[h][kBad][a][kBad] = 1.0;
        }
    }
    m.E[H - 1][kGood] = {1.0, 0.0};
    m.E[H - 1][kBad] = {0.0, 1.0};
    m.r[H - 1][kObsGood] = 1.0;
    m.r[H - 1][kObsBad] = 0.0;
    return m;
}

// Good actions drawn once from the construction seed; they are recoverable
// only by oracle-mode simulation.
inline TabularPOMDP make_combination_lock(int H, int A, std::uint64_t seed) {
    Rng rng(seed, 0x10c4);
    std::vector<int> good(H - 1 > 0 ? H - 1 : 0);
    for (auto& a : good) a = static_cast<int>(rng.bounded(static_cast<std::uint32_t>(A)));
    return make_combination_lock_explicit(H, A, good);
}

// ---- Vandermonde family ------------------------------------------------------
//
// H=1, O=2, S=k+2 with emission columns (1-v_i, v_i) for pairwise distinct
// v_i in (0,1). The k-fold observation statistics see only the count of each
// symbol, collapsing the tensor power to k+1 distinct rows, so it is rank
// deficient below order k+1; at order k+1 the distinct-count submatrix is a
// rescaled Vandermonde matrix and full rank.

inline TabularPOMDP make_vandermonde_family(int k, const std::vector<double>& v_values) {
    if (k < 2) throw std::invalid_argument("vandermonde family needs k >= 2");
    if (static_cast<int>(v_values.size()) != k + 2) {
        throw std::invalid_argument("vandermonde family needs exactly k+2 v-values");
    }
    std::set<double> distinct(v_values.begin(), v_values.end());
    if (static_cast<int>(distinct.size()) != k + 2) {
        throw std::invalid_argument("vandermonde v-values must be pairwise distinct");
    }
    for (double v : v_values) {
        if (!(v > 0.0 && v < 1.0)) {
            throw std::invalid_argument("vandermonde v-values must lie strictly inside (0,1)");
        }
    }
    const int S = k + 2;
    TabularPOMDP m;
    m.S = S;
    m.A = 2;
    m.O = 2;
    m.H = 1;
    m.d0.assign(S, 1.0 / S);
    m.T.assign(1, std::vector<std::vector<Vec>>(S, std::vector<Vec>(m.A, Vec(S, 0.0))));
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < m.A; ++a) m.T[0][s][a][s] = 1.0;  // H=1, never used
    m.E.assign(1, std::vector<Vec>(S));
    for (int s = 0; s < S; ++s) m.E[0][s] = {1.0 - v_values[s], v_values[s]};
    m.r.assign(1, Vec{0.0, 1.0});
    return m;
}

// ---- random generators --------------------------------------------------------

inline double l1_distance(const Vec& a, const Vec& b) {
    double d = 0.0;
    for (size_t i = 0; i < a.size(); ++i) d += std::fabs(a[i] - b[i]);
    return d;
}

namespace detail {
inline double min_pairwise_l1(const std::vector<Vec>& rows) {
    double best = 2.0;
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = i + 1; j < rows.size(); ++j)
            best = std::min(best, l1_distance(rows[i], rows[j]));
    return rows.size() > 1 ? best : 2.0;
}

inline void fill_random_dynamics(TabularPOMDP& m, Rng& rng) {
    m.d0 = dirichlet_uniform(m.S, rng);
    m.T.assign(m.H, std::vector<std::vector<Vec>>(m.S, std::vector<Vec>(m.A)));
    for (int h = 0; h < m.H; ++h)
        for (int s = 0; s < m.S; ++s)
            for (int a = 0; a < m.A; ++a) m.T[h][s][a] = dirichlet_uniform(m.S, rng);
    m.r.assign(m.H, Vec(m.O));
    for (int h = 0; h < m.H; ++h)
        for (int o = 0; o < m.O; ++o) m.r[h][o] = rng.uniform();
}
}  // namespace detail

struct RandomDistinguishable {
    TabularPOMDP model;
    double alpha = 0.0;  // realized distinguishability, >= the requested target
};

// Rejection-samples Dirichlet emission columns until every step's minimum
// pairwise column distance reaches alpha_target.
inline RandomDistinguishable make_random_distinguishable(int S, int A, int O, int H,
                                                         double alpha_target, std::uint64_t seed,
                                                         int attempt_budget = 5000) {
    if (O < 2) throw std::invalid_argument("make_random_distinguishable needs O >= 2");
    if (alpha_target < 0.0 || alpha_target > 2.0) {
        throw std::invalid_argument("alpha_target must lie in [0, 2]");
    }
    Rng rng(seed, 0xd15);
    TabularPOMDP m;
    m.S = S;
    m.A = A;
    m.O = O;
    m.H = H;
    m.E.assign(H, std::vector<Vec>(S));
    double alpha = 2.0;
    for (int h = 0; h < H; ++h) {
        int attempts = 0;
        while (true) {
            if (attempts++ >= attempt_budget) {
                throw std::runtime_error(
                    "make_random_distinguishable: attempt budget exhausted at step " +
                    std::to_string(h + 1) + "; alpha_target " + std::to_string(alpha_target) +
                    " appears infeasible for S=" + std::to_string(S) + ", O=" + std::to_string(O));
            }
            for (int s = 0; s < S; ++s) m.E[h][s] = dirichlet_uniform(O, rng);
            const double a = detail::min_pairwise_l1(m.E[h]);
            if (a >= alpha_target) {
                alpha = std::min(alpha, a);
                break;
            }
        }
    }
    detail::fill_random_dynamics(m, rng);
    return {std::move(m), alpha};
}

struct RandomRevealing {
    TabularPOMDP model;
    double min_singular_value = 0.0;
};

// Random model whose emission matrices have full column rank with a margin,
// so single-observation revealing certificates exist and are well behaved.
inline RandomRevealing make_random_revealing(int S, int A, int O, int H, std::uint64_t seed,
                                             double sigma_min_target = 0.15,
                                             int attempt_budget = 5000) {
    if (O < S) throw std::invalid_argument("make_random_revealing needs O >= S");
    Rng rng(seed, 0x4e7);
    TabularPOMDP m;
    m.S = S;
    m.A = A;
    m.O = O;
    m.H = H;
    m.E.assign(H, std::vector<Vec>(S));
    double worst_sigma = std::numeric_limits<double>::infinity();
    for (int h = 0; h < H; ++h) {
        int attempts = 0;
        while (true) {
            if (attempts++ >= attempt_budget) {
                throw std::runtime_error("make_random_revealing: attempt budget exhausted");
            }
            for (int s = 0; s < S; ++s) m.E[h][s] = dirichlet_uniform(O, rng);
            Eigen::MatrixXd em(O, S);
            for (int s = 0; s < S; ++s)
                for (int o = 0; o < O; ++o) em(o, s) = m.E[h][s][o];
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(em);
            const double sigma = svd.singularValues()(S - 1);
            if (sigma >= sigma_min_target) {
                worst_sigma = std::min(worst_sigma, sigma);
                break;
            }
        }
    }
    detail::fill_random_dynamics(m, rng);
    return {std::move(m), worst_sigma};
}

// ---- recipes -----------------------------------------------------------------

struct EnvRecipe {
    std::string family;  // combination_lock | vandermonde | random_distinguishable | random_revealing
    int H = 2, A = 2, S = 2, O = 2;
    int k = 2;                     // vandermonde order
    double alpha = 0.5;            // distinguishability target
    std::vector<double> v_values;  // vandermonde parameters
    std::uint64_t seed = 0;
};

inline void to_json(nlohmann::json& j, const EnvRecipe& r) {
    j = {{"family", r.family}, {"H", r.H},         {"A", r.A},    {"S", r.S},   {"O", r.O},
         {"k", r.k},           {"alpha", r.alpha}, {"v", r.v_values}, {"seed", r.seed}};
}

inline void from_json(const nlohmann::json& j, EnvRecipe& r) {
    r.family = j.at("family").get<std::string>();
    r.H = j.value("H", 2);
    r.A = j.value("A", 2);
    r.S = j.value("S", 2);
    r.O = j.value("O", 2);
    r.k = j.value("k", 2);
    r.alpha = j.value("alpha", 0.5);
    r.v_values = j.value("v", std::vector<double>{});
    r.seed = j.value("seed", std::uint64_t{0});
}

inline TabularPOMDP build(const EnvRecipe& r) {
    if (r.family == "combination_lock") return make_combination_lock(r.H, r.A, r.seed);
    if (r.family == "vandermonde") return make_vandermonde_family(r.k, r.v_values);
    if (r.family == "random_distinguishable") {
        return make_random_distinguishable(r.S, r.A, r.O, r.H, r.alpha, r.seed).model;
    }
    if (r.family == "random_revealing") {
        return make_random_revealing(r.S, r.A, r.O, r.H, r.seed).model;
    }
    throw std::invalid_argument("unknown environment family: " + r.family);
}

}  // namespace momdp::envs
