#include <doctest.h>

#include <cmath>
#include <vector>

#include "momdp/rng.hpp"

using momdp::CategoricalDist;
using momdp::Rng;

TEST_CASE("rng is deterministic per seed") {
    Rng a(42), b(42), c(7);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 64; ++i) {
        const auto x = a.next_u64();
        all_equal = all_equal && (x == b.next_u64());
        any_diff = any_diff || (x != c.next_u64());
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("uniform moments") {
    Rng rng(1);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        sum += u;
        sq += u * u;
    }
    CHECK(std::fabs(sum / n - 0.5) < 0.005);
    CHECK(std::fabs(sq / n - 1.0 / 3.0) < 0.005);
}

static void check_poisson_moments(double lambda, int n, double tol_means) {
    Rng rng(123);
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = static_cast<double>(rng.poisson(lambda));
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::fabs(mean - lambda) < tol_means);
    CHECK(std::fabs(var - lambda) < 6.0 * lambda / std::sqrt(static_cast<double>(n)) + tol_means);
}

TEST_CASE("poisson moments across both sampling regimes") {
    check_poisson_moments(0.7, 200000, 0.02);
    check_poisson_moments(8.0, 200000, 0.06);
    check_poisson_moments(120.0, 100000, 0.35);
}

TEST_CASE("poisson pmf chi-square at lambda=5") {
    Rng rng(9);
    const double lambda = 5.0;
    const int n = 100000, cells = 13;
    std::vector<int> counts(cells + 1, 0);
    for (int i = 0; i < n; ++i) {
        long long x = rng.poisson(lambda);
        counts[x > cells ? cells : static_cast<int>(x)]++;
    }
    double chi2 = 0.0;
    double p = std::exp(-lambda), cum = 0.0;
    for (int x = 0; x < cells; ++x) {
        const double expected = n * p;
        cum += p;
        if (expected > 5) chi2 += (counts[x] - expected) * (counts[x] - expected) / expected;
        p *= lambda / (x + 1);
    }
    const double tail_expected = n * (1.0 - cum);
    chi2 += (counts[cells] - tail_expected) * (counts[cells] - tail_expected) / tail_expected;
    CHECK(chi2 < 40.0);  // ~13 dof; 40 is far out in the tail
}

TEST_CASE("categorical sampler matches probabilities") {
    Rng rng(5);
    const std::vector<double> probs = {0.1, 0.2, 0.3, 0.4};
    CategoricalDist dist(probs);
    std::vector<int> counts(4, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) counts[dist.sample(rng)]++;
    for (int i = 0; i < 4; ++i) CHECK(std::fabs(counts[i] / double(n) - probs[i]) < 0.01);
}

TEST_CASE("dirichlet_uniform is a distribution") {
    Rng rng(11);
    const auto v = momdp::dirichlet_uniform(6, rng);
    double sum = 0.0;
    for (double x : v) {
        CHECK(x >= 0.0);
        sum += x;
    }
    CHECK(std::fabs(sum - 1.0) < 1e-12);
}
