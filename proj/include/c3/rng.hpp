#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace c3 {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of a named sub-stream: splitmix64(seed ^ fnv1a(name)).
/// Adding a new stream name never perturbs the draws of existing ones.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : stream) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(seed ^ h);
}

inline Rng make_rng(std::uint64_t seed, std::string_view stream) {
    return Rng(derive_seed(seed, stream));
}

template <typename Scalar = double>
Scalar uniform01(Rng& rng) {
    return std::uniform_real_distribution<Scalar>(Scalar(0), Scalar(1))(rng);
}

}  // namespace c3
