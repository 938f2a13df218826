#pragma once

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "momdp/pomdp.hpp"
#include "momdp/rng.hpp"

namespace momdp::dist_testing {

enum class TestVerdict { accept, reject, fail };

enum class TraceLevel { none, stats, full };

// Configuration shared by the two testers. M = 0 selects the default block
// count max(1, ceil(18*ln(1/delta))): each block is correct with probability
// at least 2/3, so a majority over that many blocks fails with probability at
// most exp(-M/18) <= delta.
struct TestConfig {
    long long k = 0;       // per-side sample budget; 0 means "length of the input"
    double delta = 0.1;    // target failure probability
    int M = 0;             // number of Poissonized blocks (0 = derive from delta)
    double alpha = 0.0;    // separation parameter (identity test only)
    int retries = 3;       // redraws allowed when the Poisson sizes overshoot k
    bool fallback = true;  // deterministic equal blocks after the retries run out
    int symbols = 0;       // alphabet size hint; 0 = infer from the samples
    TraceLevel trace = TraceLevel::stats;
};

struct BlockTrace {
    long long size = 0;
    double statistic = 0.0;
    double threshold = 0.0;
    int vote = 0;
    bool degenerate = false;  // empty block or empty restricted symbol set
    std::vector<std::pair<int, long long>> counts_x;  // TraceLevel::full only
    std::vector<std::pair<int, long long>> counts_y;
};

struct TestResult {
    TestVerdict verdict = TestVerdict::fail;
    int votes_accept = 0;
    int num_blocks = 0;
    long long samples_used = 0;
    bool used_fallback = false;
    int overshoots = 0;
    std::vector<BlockTrace> blocks;

    bool accepted() const { return verdict == TestVerdict::accept; }
};

inline int default_num_blocks(double delta) {
    return std::max(1, static_cast<int>(std::ceil(18.0 * std::log(1.0 / delta))));
}

namespace detail {
// More blocks than samples would leave every block empty; the block count is
// capped by the budget (and is at least one).
inline int effective_blocks(int requested, double delta, long long k) {
    const int M = requested > 0 ? requested : default_num_blocks(delta);
    return std::max(1, static_cast<int>(std::min<long long>(M, std::max<long long>(k, 1))));
}
}  // namespace detail

// ---- sample budgets ---------------------------------------------------------

inline double closeness_budget_units(int O, double alpha) {
    return std::sqrt(static_cast<double>(O)) / (alpha * alpha) +
           std::pow(static_cast<double>(O), 2.0 / 3.0) / std::pow(alpha, 4.0 / 3.0);
}

inline double identity_budget_units(int O, double alpha) {
    return std::sqrt(static_cast<double>(O)) / (alpha * alpha);
}

// The calibrated leading constant for the sample budgets. Resolution order:
// $MOMDP_CACHE_DIR/calibration.json, the repo config file, then the compiled
// default (which mirrors the committed config).
inline constexpr double kDefaultC1 = 2400.0;

inline double pinned_c1() {
    static const double value = [] {
        auto read = [](const std::string& path) -> double {
            std::ifstream in(path);
            if (!in) return -1.0;
            nlohmann::json j;
            in >> j;
            if (!j.contains("C1")) return -1.0;
            return j["C1"].get<double>();
        };
        if (const char* dir = std::getenv("MOMDP_CACHE_DIR")) {
            const double v = read(std::string(dir) + "/calibration.json");
            if (v > 0) return v;
        }
#ifdef MOMDP_SOURCE_DIR
        const double v = read(std::string(MOMDP_SOURCE_DIR) + "/config/calibration.json");
        if (v > 0) return v;
#endif
        return kDefaultC1;
    }();
    return value;
}

inline long long closeness_budget(int O, double alpha, double delta, double c1) {
    return static_cast<long long>(
        std::ceil(c1 * closeness_budget_units(O, alpha) * std::log(1.0 / delta)));
}

inline long long identity_budget(int O, double alpha, double delta, double c1) {
    return static_cast<long long>(
        std::ceil(c1 * identity_budget_units(O, alpha) * std::log(1.0 / delta)));
}

// Per-test budget for a full OST run: the failure probability is split over
// the <= 2*S*T*H tests performed via a union bound.
inline long long ost_test_budget(int O, double alpha, int S, int T, int H, double delta,
                                 double c1) {
    const double per_test_log = std::log(2.0 * S * static_cast<double>(T) * H / delta);
    return static_cast<long long>(
        std::ceil(c1 * closeness_budget_units(O, alpha) * per_test_log));
}

// ---- Poissonized block partition ---------------------------------------------

struct Partition {
    std::vector<long long> sizes;
    bool failed = false;
    bool used_fallback = false;
    int overshoots = 0;
    long long total() const {
        long long t = 0;
        for (long long n : sizes) t += n;
        return t;
    }
};

// Draws M block sizes ~ Poi(k/M). If they exceed the hard budget k, redraws up
// to `retries` times, then either falls back to deterministic equal blocks of
// floor(k/M) or reports failure.
inline Partition draw_partition(long long k, int M, int retries, bool fallback, Rng& rng) {
    Partition part;
    part.sizes.resize(M);
    const double lambda = static_cast<double>(k) / M;
    for (int attempt = 0; attempt <= retries; ++attempt) {
        long long total = 0;
        for (auto& n : part.sizes) {
            n = rng.poisson(lambda);
            total += n;
        }
        if (total <= k) return part;
        ++part.overshoots;
    }
    if (!fallback) {
        part.failed = true;
        return part;
    }
    std::fill(part.sizes.begin(), part.sizes.end(), k / M);
    part.used_fallback = true;
    return part;
}

// ---- block statistics ---------------------------------------------------------

namespace detail {

struct CountsWorkspace {
    std::vector<long long> x, y;
    std::vector<int> touched;
    void ensure(int symbols) {
        if (static_cast<int>(x.size()) < symbols) {
            x.assign(symbols, 0);
            y.assign(symbols, 0);
        }
    }
};

inline int max_symbol(std::span<const int> v) {
    int m = -1;
    for (int s : v) m = std::max(m, s);
    return m;
}

// Chi-square two-sample block statistic with the 0/0 terms dropped. Small
// alphabets take the direct-count path; large ones track touched symbols so a
// block costs O(N_j) rather than O(alphabet).
inline double closeness_block_stat(std::span<const int> x, std::span<const int> y, long long off,
                                   long long n, int symbols, CountsWorkspace& ws,
                                   BlockTrace* trace) {
    double stat = 0.0;
    if (symbols <= 128) {
        auto* cx = ws.x.data();
        auto* cy = ws.y.data();
        for (long long i = off; i < off + n; ++i) {
            ++cx[x[i]];
            ++cy[y[i]];
        }
        for (int o = 0; o < symbols; ++o) {
            const double nx = static_cast<double>(cx[o]);
            const double ny = static_cast<double>(cy[o]);
            if (nx + ny == 0.0) continue;
            const double diff = nx - ny;
            stat += (diff * diff - nx - ny) / (nx + ny);
            if (trace) {
                if (cx[o] > 0) trace->counts_x.emplace_back(o, cx[o]);
                if (cy[o] > 0) trace->counts_y.emplace_back(o, cy[o]);
            }
            cx[o] = 0;
            cy[o] = 0;
        }
        return stat;
    }
    ws.touched.clear();
    for (long long i = off; i < off + n; ++i) {
        if (ws.x[x[i]] == 0 && ws.y[x[i]] == 0) ws.touched.push_back(x[i]);
        ++ws.x[x[i]];
        if (ws.x[y[i]] == 0 && ws.y[y[i]] == 0) ws.touched.push_back(y[i]);
        ++ws.y[y[i]];
    }
    for (int o : ws.touched) {
        const double nx = static_cast<double>(ws.x[o]);
        const double ny = static_cast<double>(ws.y[o]);
        const double diff = nx - ny;
        stat += (diff * diff - nx - ny) / (nx + ny);
        if (trace) {
            if (ws.x[o] > 0) trace->counts_x.emplace_back(o, ws.x[o]);
            if (ws.y[o] > 0) trace->counts_y.emplace_back(o, ws.y[o]);
        }
    }
    for (int o : ws.touched) {
        ws.x[o] = 0;
        ws.y[o] = 0;
    }
    return stat;
}

// One-sample chi-square block statistic restricted to the symbol set A; the
// zero-count symbols of A still contribute their expectation term.
inline double identity_block_stat(std::span<const int> x, long long off, long long n, const Vec& q,
                                  const std::vector<int>& support, CountsWorkspace& ws,
                                  BlockTrace* trace) {
    for (long long i = off; i < off + n; ++i) ++ws.x[x[i]];
    double stat = 0.0;
    for (int o : support) {
        const double expected = static_cast<double>(n) * q[o];
        const double count = static_cast<double>(ws.x[o]);
        stat += ((count - expected) * (count - expected) - count) / expected;
        if (trace && ws.x[o] > 0) trace->counts_x.emplace_back(o, ws.x[o]);
    }
    for (long long i = off; i < off + n; ++i) ws.x[x[i]] = 0;
    return stat;
}

inline TestVerdict majority(int votes_accept, int M) {
    return 2 * votes_accept >= M ? TestVerdict::accept : TestVerdict::reject;
}

}  // namespace detail

// ---- closeness test (two-sample) ------------------------------------------------
//
// Decides whether two k-sample blocks were drawn from the same distribution.
// Poissonized blocks vote via the chi-square statistic against the sqrt(3*N_j)
// threshold; the verdict is the majority vote.
inline TestResult closeness_test(std::span<const int> x, std::span<const int> y,
                                 const TestConfig& cfg, Rng& rng) {
    const long long k = cfg.k > 0 ? cfg.k : static_cast<long long>(x.size());
    if (static_cast<long long>(x.size()) != k || static_cast<long long>(y.size()) != k) {
        throw std::invalid_argument("closeness_test: both sides must have exactly k samples");
    }
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) {
        throw std::invalid_argument("closeness_test: delta must lie in (0, 1)");
    }
    const int M = detail::effective_blocks(cfg.M, cfg.delta, k);

    TestResult res;
    const Partition part = draw_partition(k, M, cfg.retries, cfg.fallback, rng);
    res.overshoots = part.overshoots;
    res.used_fallback = part.used_fallback;
    res.num_blocks = M;
    if (part.failed) {
        res.verdict = TestVerdict::fail;
        return res;
    }

    thread_local detail::CountsWorkspace ws;
    const int symbols = cfg.symbols > 0
                            ? cfg.symbols
                            : std::max(detail::max_symbol(x), detail::max_symbol(y)) + 1;
    ws.ensure(symbols);

    long long off = 0;
    for (int j = 0; j < M; ++j) {
        const long long n = part.sizes[j];
        BlockTrace* bt = nullptr;
        if (cfg.trace != TraceLevel::none) {
            res.blocks.emplace_back();
            bt = &res.blocks.back();
            bt->size = n;
        }
        const double stat = detail::closeness_block_stat(
            x, y, off, n, symbols, ws, cfg.trace == TraceLevel::full ? bt : nullptr);
        const double threshold = std::sqrt(3.0 * static_cast<double>(n));
        const int vote = stat <= threshold ? 1 : 0;
        res.votes_accept += vote;
        if (bt) {
            bt->statistic = stat;
            bt->threshold = threshold;
            bt->vote = vote;
            bt->degenerate = n == 0;
        }
        off += n;
    }
    res.samples_used = off;
    res.verdict = detail::majority(res.votes_accept, M);
    return res;
}

// ---- identity test (one-sample) ------------------------------------------------
//
// Decides whether k samples are consistent with the known distribution q or
// alpha-far from it in l1. Symbols below the mass cutoff alpha/(50*O) are
// excluded from the statistic.
inline TestResult identity_test(std::span<const int> x, const Vec& q, const TestConfig& cfg,
                                Rng& rng) {
    if (!momdp::detail::is_distribution(q, static_cast<int>(q.size()))) {
        throw std::invalid_argument("identity_test: q is not a probability vector");
    }
    if (!(cfg.alpha > 0.0 && cfg.alpha <= 2.0)) {
        throw std::invalid_argument("identity_test: alpha must lie in (0, 2]");
    }
    const long long k = cfg.k > 0 ? cfg.k : static_cast<long long>(x.size());
    if (static_cast<long long>(x.size()) != k) {
        throw std::invalid_argument("identity_test: need exactly k samples");
    }
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) {
        throw std::invalid_argument("identity_test: delta must lie in (0, 1)");
    }
    const int O = static_cast<int>(q.size());
    const int M = detail::effective_blocks(cfg.M, cfg.delta, k);

    std::vector<int> support;
    const double cutoff = cfg.alpha / (50.0 * O);
    for (int o = 0; o < O; ++o) {
        if (q[o] >= cutoff) support.push_back(o);
    }

    TestResult res;
    const Partition part = draw_partition(k, M, cfg.retries, cfg.fallback, rng);
    res.overshoots = part.overshoots;
    res.used_fallback = part.used_fallback;
    res.num_blocks = M;
    if (part.failed) {
        res.verdict = TestVerdict::fail;
        return res;
    }

    thread_local detail::CountsWorkspace ws;
    ws.ensure(std::max(detail::max_symbol(x) + 1, O));

    long long off = 0;
    for (int j = 0; j < M; ++j) {
        const long long n = part.sizes[j];
        BlockTrace* bt = nullptr;
        if (cfg.trace != TraceLevel::none) {
            res.blocks.emplace_back();
            bt = &res.blocks.back();
            bt->size = n;
        }
        const bool degenerate = n == 0 || support.empty();
        const double stat =
            degenerate ? 0.0
                       : detail::identity_block_stat(x, off, n, q, support, ws,
                                                     cfg.trace == TraceLevel::full ? bt : nullptr);
        const double threshold = static_cast<double>(n) * cfg.alpha * cfg.alpha / 10.0;
        const int vote = stat <= threshold ? 1 : 0;
        res.votes_accept += vote;
        if (bt) {
            bt->statistic = stat;
            bt->threshold = threshold;
            bt->vote = vote;
            bt->degenerate = degenerate;
        }
        off += n;
    }
    res.samples_used = off;
    res.verdict = detail::majority(res.votes_accept, M);
    return res;
}

// ---- per-state identity testers --------------------------------------------------

namespace detail {
inline double step_distinguishability(const TabularPOMDP& m, int h) {
    double best = 2.0;
    for (int i = 0; i < m.S; ++i) {
        for (int j = i + 1; j < m.S; ++j) {
            double d = 0.0;
            for (int o = 0; o < m.O; ++o) d += std::fabs(m.E[h][i][o] - m.E[h][j][o]);
            best = std::min(best, d);
        }
    }
    return m.S > 1 ? best : 2.0;
}
}  // namespace detail

// A frozen identity test for one latent state: the Poissonized partition is
// drawn once at construction, so the resulting predicate is a deterministic
// function of the observation block — exactly the fixed tests Z_s that the
// distinguishable-to-revealing embedding requires.
class StateTester {
public:
    StateTester() = default;
    StateTester(Vec q, double alpha, long long k, int M, std::vector<long long> block_sizes)
        : q_(std::move(q)), alpha_(alpha), k_(k), M_(M), sizes_(std::move(block_sizes)) {
        const int O = static_cast<int>(q_.size());
        const double cutoff = alpha_ / (50.0 * O);
        for (int o = 0; o < O; ++o) {
            if (q_[o] >= cutoff) support_.push_back(o);
        }
    }

    long long k() const { return k_; }
    const Vec& target() const { return q_; }

    // True when the block looks like this state (the identity test accepts).
    bool operator()(std::span<const int> block) const {
        if (static_cast<long long>(block.size()) != k_) {
            throw std::invalid_argument("StateTester: block has wrong length");
        }
        thread_local detail::CountsWorkspace ws;
        ws.ensure(std::max(detail::max_symbol(block) + 1, static_cast<int>(q_.size())));
        int votes = 0;
        long long off = 0;
        for (int j = 0; j < M_; ++j) {
            const long long n = sizes_[j];
            const double stat =
                (n == 0 || support_.empty())
                    ? 0.0
                    : detail::identity_block_stat(block, off, n, q_, support_, ws, nullptr);
            if (stat <= static_cast<double>(n) * alpha_ * alpha_ / 10.0) ++votes;
            off += n;
        }
        return 2 * votes >= M_;
    }

private:
    Vec q_;
    double alpha_ = 0.0;
    long long k_ = 0;
    int M_ = 0;
    std::vector<long long> sizes_;
    std::vector<int> support_;
};

// Builds the frozen tester Z_s for state s at step h. Refuses models with zero
// distinguishability at that step (there is no separation to test against).
// blocks_override forces the block count; 0 keeps the delta-derived default.
// deterministic_blocks skips the Poisson draw and uses equal blocks floor(k/M).
inline StateTester state_identity_tester(const TabularPOMDP& m, int h, int s, long long k,
                                         double delta, Rng& rng, int blocks_override = 0,
                                         bool deterministic_blocks = false) {
    const double alpha = detail::step_distinguishability(m, h);
    if (alpha <= 0.0) {
        throw std::invalid_argument("state_identity_tester: distinguishability is 0 at step " +
                                    std::to_string(h + 1));
    }
    const int M = detail::effective_blocks(blocks_override, delta, k);
    Partition part;
    if (deterministic_blocks) {
        part.sizes.assign(M, k / M);
    } else {
        part = draw_partition(k, M, 3, true, rng);
    }
    return StateTester(m.E[h][s], alpha, k, M, std::move(part.sizes));
}

}  // namespace momdp::dist_testing
