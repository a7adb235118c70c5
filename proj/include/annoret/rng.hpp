#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "annoret/util.hpp"

namespace annoret {

// Deterministic random stream with a fixed cross-platform algorithm
// (splitmix64). std::mt19937 plus the standard distributions is not
// bit-reproducible across standard libraries, so sampling is done here.
class DetRng {
public:
    explicit DetRng(std::uint64_t seed) : state_(seed) {}

    /// Stream keyed by (seed, label, index); order-independent across queries.
    static DetRng for_stream(std::uint64_t seed, std::string_view label, std::uint64_t index = 0) {
        return DetRng(hash_mix(hash_mix(seed, fnv1a64(label)), index));
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform integer in [0, n), n >= 1. Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n) {
        std::uint64_t threshold = (0 - n) % n;
        while (true) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct elements of `v`, uniformly without replacement, k <= |v|.
    template <typename T>
    std::vector<T> sample(const std::vector<T>& v, std::size_t k) {
        std::vector<T> pool = v;
        std::vector<T> out;
        out.reserve(k);
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = static_cast<std::size_t>(below(pool.size() - i)) + i;
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
        return out;
    }

private:
    std::uint64_t state_;
};

}  // namespace annoret
