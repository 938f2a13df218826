#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace momdp {

// Deterministic, seedable generator (xoshiro256++ seeded through splitmix64).
// All randomness in the library flows through explicit Rng instances so that
// runs are reproducible given a seed; nothing touches a global generator.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
        for (auto& word : s_) word = splitmix64(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Lemire's method without the rejection step is
    // fine here: n is tiny relative to 2^64.
    std::uint32_t bounded(std::uint32_t n) {
        return static_cast<std::uint32_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Derive an independent child generator; used to fan out seeded subtasks.
    Rng derive(std::uint64_t tag) {
        return Rng(next_u64() ^ (0xbf58476d1ce4e5b9ULL * (tag + 1)), tag);
    }

    double exponential() { return -std::log1p(-uniform()); }

    // Poisson draw: Knuth's product method for small means, Hormann's PTRS
    // transformed rejection for large ones.
    long long poisson(double lambda) {
        if (lambda <= 0) return 0;
        if (lambda < 30.0) return poisson_knuth(lambda);
        return poisson_ptrs(lambda);
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    long long poisson_knuth(double lambda) {
        const double l = std::exp(-lambda);
        long long n = 0;
        double p = 1.0;
        do {
            ++n;
            p *= uniform();
        } while (p > l);
        return n - 1;
    }

    long long poisson_ptrs(double lambda) {
        const double b = 0.931 + 2.53 * std::sqrt(lambda);
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        const double log_lambda = std::log(lambda);
        while (true) {
            double u = uniform() - 0.5;
            double v = uniform();
            const double us = 0.5 - std::fabs(u);
            const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
            if (us >= 0.07 && v <= v_r) return static_cast<long long>(k);
            if (k < 0 || (us < 0.013 && v > us)) continue;
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                k * log_lambda - lambda - std::lgamma(k + 1.0)) {
                return static_cast<long long>(k);
            }
        }
    }

    std::uint64_t s_[4];
};

// Inverse-CDF sampler over a fixed probability vector.
class CategoricalDist {
public:
    CategoricalDist() = default;
    explicit CategoricalDist(const std::vector<double>& probs) {
        cum_.reserve(probs.size());
        double acc = 0.0;
        for (double p : probs) {
            acc += p;
            cum_.push_back(acc);
        }
        if (!cum_.empty()) cum_.back() = 1.0;
    }

    int sample(Rng& rng) const {
        const double u = rng.uniform();
        int lo = 0, hi = static_cast<int>(cum_.size()) - 1;
        while (lo < hi) {
            const int mid = (lo + hi) / 2;
            if (u < cum_[mid]) hi = mid; else lo = mid + 1;
        }
        return lo;
    }

private:
    std::vector<double> cum_;
};

// Symmetric Dirichlet(1) sample: normalized exponentials.
inline std::vector<double> dirichlet_uniform(int n, Rng& rng) {
    if (n <= 0) throw std::invalid_argument("dirichlet_uniform: n must be positive");
    std::vector<double> v(n);
    double total = 0.0;
    for (auto& x : v) {
        x = rng.exponential();
        total += x;
    }
    for (auto& x : v) x /= total;
    return v;
}

}  // namespace momdp
