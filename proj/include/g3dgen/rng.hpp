#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace g3dgen {

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

} // namespace detail

// Derives an independent seed from (root seed, label, index). Distinct labels
// or indices give unrelated streams for the same root seed.
inline uint64_t derive_seed(uint64_t seed, std::string_view label, uint64_t index = 0) {
    uint64_t h = detail::fnv1a64(label);
    h = detail::splitmix64(h ^ detail::splitmix64(seed));
    h = detail::splitmix64(h ^ index);
    return h;
}

// Seeded random stream. All sampling is built on the raw 64-bit output, so
// results are identical across platforms and standard library versions.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : gen_(seed) {}

    static RngStream substream(uint64_t seed, std::string_view label, uint64_t index = 0) {
        return RngStream(derive_seed(seed, label, index));
    }

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased uniform integer in [0, n).
    uint64_t uniform_int(uint64_t n) {
        if (n == 0)
            throw std::invalid_argument("uniform_int: n must be positive");
        uint64_t min = (0 - n) % n;
        uint64_t x = next_u64();
        while (x < min)
            x = next_u64();
        return x % n;
    }

    // Standard normal via Box-Muller; two raw draws per value.
    double normal() {
        double u1 = 1.0 - uniform(); // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Index drawn from a probability vector (assumed non-negative, sum ~1).
    int sample_discrete(const double* probs, int n) {
        if (n <= 0)
            throw std::invalid_argument("sample_discrete: empty distribution");
        double u = uniform();
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += probs[i];
            if (u < acc)
                return i;
        }
        return n - 1; // rounding slack: sum fell just short of u
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = uniform_int(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

} // namespace g3dgen
