#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace agan {

// Seed mixing (splitmix64 finalizer). Used to derive independent RNG
// streams from (seed, epoch, index)-style tuples so that parallel and
// serial evaluation orders produce identical draws.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return mix64(a ^ mix64(b));
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return hash_combine(hash_combine(a, b), c);
}

// Deterministic RNG with hand-rolled distributions. std::*_distribution
// output is implementation-defined, so uniform/normal are implemented
// directly on top of the mt19937_64 bit stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(mix64(seed)) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        return n == 0 ? 0 : gen_() % n;
    }

    // Standard normal via Box-Muller (no caching, deterministic draw count).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace agan
