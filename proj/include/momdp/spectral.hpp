#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "momdp/dist_testing.hpp"
#include "momdp/lp.hpp"
#include "momdp/pomdp.hpp"
#include "momdp/rng.hpp"

namespace momdp::spectral {

// ---- distinguishability -------------------------------------------------------

struct DistinguishabilityReport {
    struct Step {
        double alpha = 2.0;   // min pairwise l1 distance between emission columns
        int argmin_i = -1;
        int argmin_j = -1;
    };
    std::vector<Step> steps;
    double alpha = 2.0;  // min over steps
};

inline DistinguishabilityReport distinguishability(const TabularPOMDP& m) {
    DistinguishabilityReport rep;
    rep.steps.resize(m.H);
    for (int h = 0; h < m.H; ++h) {
        auto& step = rep.steps[h];
        for (int i = 0; i < m.S; ++i) {
            for (int j = i + 1; j < m.S; ++j) {
                double d = 0.0;
                for (int o = 0; o < m.O; ++o) d += std::fabs(m.E[h][i][o] - m.E[h][j][o]);
                if (step.argmin_i == -1 || d < step.alpha) {
                    step.alpha = d;
                    step.argmin_i = i;
                    step.argmin_j = j;
                }
            }
        }
        if (m.S == 1) step.alpha = 2.0;
        rep.alpha = std::min(rep.alpha, step.alpha);
    }
    return rep;
}

// ---- tensor powers -------------------------------------------------------------

constexpr long long kDefaultTensorRowCap = 1'000'000;

inline long long tensor_rows(int O, int k, long long cap) {
    long long rows = 1;
    for (int i = 0; i < k; ++i) {
        rows *= O;
        if (rows > cap) {
            throw std::runtime_error("tensor power too large: O^k = " + std::to_string(O) + "^" +
                                     std::to_string(k) + " exceeds cap " + std::to_string(cap));
        }
    }
    return rows;
}

// Lexicographic block index (o_1 most significant).
inline long long block_index(std::span<const int> block, int O) {
    long long idx = 0;
    for (int o : block) idx = idx * O + o;
    return idx;
}

inline std::vector<int> block_from_index(long long idx, int O, int k) {
    std::vector<int> block(k);
    for (int i = k - 1; i >= 0; --i) {
        block[i] = static_cast<int>(idx % O);
        idx /= O;
    }
    return block;
}

// The k-fold column-wise tensor power of the step-h emission matrix: column s
// holds the joint law of k i.i.d. observations from state s, rows in
// lexicographic block order.
inline Eigen::MatrixXd tensor_power_emission(const TabularPOMDP& m, int h, int k,
                                             long long row_cap = kDefaultTensorRowCap) {
    if (k < 1) throw std::invalid_argument("tensor_power_emission: k must be >= 1");
    const long long rows = tensor_rows(m.O, k, row_cap);
    Eigen::MatrixXd out(rows, m.S);
    std::vector<int> block(k, 0);
    for (long long r = 0; r < rows; ++r) {
        for (int s = 0; s < m.S; ++s) {
            double p = 1.0;
            for (int o : block) p *= m.E[h][s][o];
            out(r, s) = p;
        }
        int i = k - 1;
        while (i >= 0 && block[i] == m.O - 1) block[i--] = 0;
        if (i >= 0) ++block[i];
    }
    return out;
}

// Numerical rank with singular values below rel_threshold * sigma_max counted
// as zero.
inline int numerical_rank(const Eigen::MatrixXd& M, double rel_threshold = 1e-8) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    const double cut = rel_threshold * sv(0);
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i) {
        if (sv(i) > cut) ++rank;
    }
    return rank;
}

inline double norm_1_to_1(const Eigen::MatrixXd& M) {
    double best = 0.0;
    for (int c = 0; c < M.cols(); ++c) best = std::max(best, M.col(c).cwiseAbs().sum());
    return best;
}

// ---- revealing certificates ------------------------------------------------------

enum class CertMethod { pseudo_inverse, lp_exact, test_embedded };

inline const char* to_string(CertMethod m) {
    switch (m) {
        case CertMethod::pseudo_inverse: return "pseudo_inverse";
        case CertMethod::lp_exact: return "lp_exact";
        case CertMethod::test_embedded: return "test_embedded";
    }
    return "?";
}

// Witness that the step-h tensor-power emission admits a left inverse: carries
// the inverse, its 1->1 norm (the alpha^-1 of the revealing condition), and
// the construction method. On rank deficiency `ok` is false and
// `numerical_rank` holds the rank that was found.
struct RevealingCertificate {
    bool ok = false;
    int h = 0;
    int k = 0;
    int O = 0;
    CertMethod method = CertMethod::pseudo_inverse;
    Eigen::MatrixXd left_inverse;  // S x O^k
    double norm = 0.0;
    int numerical_rank = 0;
    std::string message;
};

namespace detail {

// min t  s.t.  B * M = I,  sum_s |B(s,o)| <= t for every column o.
// Encoded with B = P - Q, P,Q >= 0.
inline Eigen::MatrixXd min_norm_left_inverse(const Eigen::MatrixXd& M, double& norm_out) {
    const int N = static_cast<int>(M.rows());
    const int S = static_cast<int>(M.cols());
    lp::LpProblem p;
    p.n = 1 + 2 * S * N;  // t, then P, then Q (row-major s*N+o)
    auto pvar = [N](int s, int o) { return 1 + s * N + o; };
    auto qvar = [N, S](int s, int o) { return 1 + S * N + s * N + o; };

    p.c.assign(p.n, 0.0);
    p.c[0] = 1.0;
    for (int s = 0; s < S; ++s) {
        for (int sp = 0; sp < S; ++sp) {
            lp::Vec row(p.n, 0.0);
            for (int o = 0; o < N; ++o) {
                row[pvar(s, o)] = M(o, sp);
                row[qvar(s, o)] = -M(o, sp);
            }
            p.A_eq.push_back(std::move(row));
            p.b_eq.push_back(s == sp ? 1.0 : 0.0);
        }
    }
    for (int o = 0; o < N; ++o) {
        lp::Vec row(p.n, 0.0);
        row[0] = -1.0;
        for (int s = 0; s < S; ++s) {
            row[pvar(s, o)] = 1.0;
            row[qvar(s, o)] = 1.0;
        }
        p.A_ub.push_back(std::move(row));
        p.b_ub.push_back(0.0);
    }

    const auto sol = lp::solve(p);
    if (sol.status != lp::LpStatus::optimal) {
        throw std::runtime_error("lp_exact left inverse: LP did not reach optimality");
    }
    Eigen::MatrixXd B(S, N);
    for (int s = 0; s < S; ++s)
        for (int o = 0; o < N; ++o) B(s, o) = sol.x[pvar(s, o)] - sol.x[qvar(s, o)];
    norm_out = sol.objective;
    return B;
}

}  // namespace detail

inline RevealingCertificate revealing_certificate(const TabularPOMDP& m, int h, int k,
                                                  CertMethod method,
                                                  long long row_cap = kDefaultTensorRowCap) {
    RevealingCertificate cert;
    cert.h = h;
    cert.k = k;
    cert.O = m.O;
    cert.method = method;
    const Eigen::MatrixXd M = tensor_power_emission(m, h, k, row_cap);
    cert.numerical_rank = numerical_rank(M);
    if (cert.numerical_rank < m.S) {
        cert.ok = false;
        cert.message = "not k-MO-revealing at step " + std::to_string(h + 1) + ": rank " +
                       std::to_string(cert.numerical_rank) + " < S = " + std::to_string(m.S);
        return cert;
    }
    if (method == CertMethod::pseudo_inverse) {
        cert.left_inverse = M.completeOrthogonalDecomposition().pseudoInverse();
    } else if (method == CertMethod::lp_exact) {
        double norm = 0.0;
        cert.left_inverse = detail::min_norm_left_inverse(M, norm);
    } else {
        throw std::invalid_argument("revealing_certificate: use test_embedded_inverse for that method");
    }
    const Eigen::MatrixXd residual = cert.left_inverse * M - Eigen::MatrixXd::Identity(m.S, m.S);
    if (residual.cwiseAbs().maxCoeff() > 1e-6) {
        cert.ok = false;
        cert.message = "left-inverse identity failed numerically";
        return cert;
    }
    cert.norm = norm_1_to_1(cert.left_inverse);
    cert.ok = true;
    return cert;
}

// The order-(k+1) certificate obtained by ignoring the extra observation:
// b'(s, o_1..o_{k+1}) = b(s, o_1..o_k). Satisfies the left-inverse identity at
// order k+1 with the same 1->1 norm.
inline RevealingCertificate extend_left_inverse(const RevealingCertificate& cert,
                                                long long row_cap = kDefaultTensorRowCap) {
    if (!cert.ok) throw std::invalid_argument("extend_left_inverse: input certificate is not valid");
    const long long old_cols = cert.left_inverse.cols();
    if (old_cols * cert.O > row_cap) {
        throw std::runtime_error("extend_left_inverse: O^(k+1) exceeds cap");
    }
    RevealingCertificate out = cert;
    out.k = cert.k + 1;
    out.left_inverse.resize(cert.left_inverse.rows(), old_cols * cert.O);
    for (long long b = 0; b < old_cols; ++b) {
        for (int o = 0; o < cert.O; ++o) {
            out.left_inverse.col(b * cert.O + o) = cert.left_inverse.col(b);
        }
    }
    out.norm = norm_1_to_1(out.left_inverse);
    return out;
}

// ---- the distinguishable -> MO-revealing embedding --------------------------------
//
// Builds per-state identity tests Z_s, the winner matrix Y whose rows have
// disjoint supports (so its 1->1 norm is exactly 1), the perturbation
// E = Y * O^{tensor k} - I, and, when ||E|| < 1, the left inverse
// (I+E)^{-1} Y whose 1->1 norm the containment theorem bounds by 2 once k is
// large enough.

struct TestEmbeddedInverse {
    bool ok = false;
    int h = 0;
    long long k = 0;
    double delta = 0.0;
    bool exact = false;               // exact column enumeration vs Monte Carlo
    long long mc_samples_per_column = 0;
    Eigen::MatrixXd E;                // S x S
    double e_norm = 0.0;
    Eigen::MatrixXd inverse_base;     // (I+E)^{-1}
    double norm = 0.0;                // 1->1 norm of (I+E)^{-1} Y
    double y_norm = 1.0;              // structural: one 1 per column
    std::vector<dist_testing::StateTester> testers;
    std::string message;

    // Y assigns each block to the first state whose identity test accepts
    // (all-reject blocks fall to state 0 by the lexicographic tie rule).
    int winner(std::span<const int> block) const {
        int best = 0, best_z = 2;
        for (int s = 0; s < static_cast<int>(testers.size()); ++s) {
            const int z = testers[s](block) ? 0 : 1;
            if (z < best_z) {
                best_z = z;
                best = s;
                if (z == 0) break;  // lexicographically first minimizer
            }
        }
        return best;
    }
};

struct TestEmbeddedOptions {
    double delta = 0.0;            // 0 -> the proof's choice 1/(2 S^2)
    std::uint64_t seed = 0;        // freezes the testers' Poisson partitions
    long long exact_cap = 10'000;  // enumerate all blocks when O^k fits
    double mc_epsilon = 0.02;      // per-entry Monte Carlo accuracy target
    double mc_confidence = 1e-3;   // per-entry Hoeffding failure probability
    int blocks_override = 0;       // force the testers' block count (0 = default)
    bool deterministic_blocks = false;  // equal blocks instead of Poisson sizes
};

inline TestEmbeddedInverse test_embedded_inverse(const TabularPOMDP& m, int h, long long k,
                                                 TestEmbeddedOptions opts = {}) {
    TestEmbeddedInverse res;
    res.h = h;
    res.k = k;
    res.delta = opts.delta > 0 ? opts.delta : 1.0 / (2.0 * m.S * m.S);

    const auto rep = distinguishability(m);
    if (!(rep.steps[h].alpha > 0.0)) {
        res.message = "model is not distinguishable at step " + std::to_string(h + 1);
        return res;
    }

    Rng rng(opts.seed, 0x7e57);
    res.testers.reserve(m.S);
    for (int s = 0; s < m.S; ++s) {
        res.testers.push_back(dist_testing::state_identity_tester(
            m, h, s, k, res.delta, rng, opts.blocks_override, opts.deterministic_blocks));
    }

    // E = Y * O^{tensor k} - I, exactly when O^k is enumerable, otherwise by
    // Monte Carlo with a per-entry Hoeffding budget.
    Eigen::MatrixXd YO = Eigen::MatrixXd::Zero(m.S, m.S);
    long double rows_ld = 1.0L;
    for (long long i = 0; i < k && rows_ld <= static_cast<long double>(opts.exact_cap); ++i) {
        rows_ld *= m.O;
    }
    res.exact = rows_ld <= static_cast<long double>(opts.exact_cap);

    if (res.exact) {
        const long long rows = static_cast<long long>(rows_ld);
        std::vector<int> block(k, 0);
        for (long long r = 0; r < rows; ++r) {
            const int w = res.winner(block);
            for (int s = 0; s < m.S; ++s) {
                double p = 1.0;
                for (int o : block) p *= m.E[h][s][o];
                YO(w, s) += p;
            }
            long long i = k - 1;
            while (i >= 0 && block[i] == m.O - 1) block[i--] = 0;
            if (i >= 0) ++block[i];
        }
    } else {
        const long long n = static_cast<long long>(
            std::ceil(std::log(2.0 / opts.mc_confidence) / (2.0 * opts.mc_epsilon * opts.mc_epsilon)));
        res.mc_samples_per_column = n;
        std::vector<int> block(k);
        for (int s = 0; s < m.S; ++s) {
            CategoricalDist dist(m.E[h][s]);
            for (long long i = 0; i < n; ++i) {
                for (auto& o : block) o = dist.sample(rng);
                YO(res.winner(block), s) += 1.0;
            }
            YO.col(s) /= static_cast<double>(n);
        }
    }

    res.E = YO - Eigen::MatrixXd::Identity(m.S, m.S);
    res.e_norm = norm_1_to_1(res.E);
    if (res.e_norm >= 1.0) {
        res.message = "perturbation norm " + std::to_string(res.e_norm) +
                      " >= 1; the identity tests are unreliable at this k, use a larger k";
        return res;
    }
    res.inverse_base = (Eigen::MatrixXd::Identity(m.S, m.S) + res.E).inverse();
    res.norm = norm_1_to_1(res.inverse_base);  // = max_s ||(I+E)^{-1} Y e_b||_1 over winner states
    res.ok = true;
    return res;
}

}  // namespace momdp::spectral
