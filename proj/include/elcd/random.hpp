#pragma once

#include <cstdint>
#include <random>

namespace elcd {

using Rng = std::mt19937_64;

/// Uniform double in [lo, hi) built from the raw 64-bit stream, so values
/// are identical across standard library implementations.
inline double uniform(Rng& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

/// Independent child seed (splitmix64 step).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Fisher-Yates with the portable uniform draw.
template <class It>
void shuffle(It first, It last, Rng& rng) {
    const auto n = last - first;
    for (auto i = n - 1; i > 0; --i) {
        const auto j = static_cast<decltype(i)>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(first[i], first[j]);
    }
}

}  // namespace elcd
