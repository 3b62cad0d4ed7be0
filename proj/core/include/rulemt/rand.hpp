#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace rulemt::rng {

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Folds a string salt into a numeric seed so per-instance draws are
// independent of iteration order.
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt) {
    std::uint64_t h = fnv1a64(salt);
    return h ^ (seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
}

// std::shuffle's distribution is implementation-defined; Fisher-Yates over
// raw mt19937_64 output is reproducible across standard libraries.
template <typename T>
void seeded_shuffle(std::vector<T>& v, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[static_cast<std::size_t>(gen() % i)]);
}

}  // namespace rulemt::rng
