#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace cafforge {

/// The one generator used throughout. mt19937_64 output is fixed by the
/// standard, and the helpers below avoid the implementation-defined
/// std::uniform_int_distribution / std::shuffle, so seeded results are
/// identical on every platform.
using Rng = std::mt19937_64;

inline constexpr std::uint64_t kDefaultSeed = 42;

/// FNV-1a, 64 bit.
constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// splitmix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Uniform integer on [lo, hi], inclusive, by rejection sampling.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) {
        return lo;
    }
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) {  // full 64-bit range
        return static_cast<std::int64_t>(rng());
    }
    // Values in [threshold, 2^64) split evenly into `span` residues.
    const std::uint64_t threshold = (0 - span) % span;
    std::uint64_t draw = rng();
    while (draw < threshold) {
        draw = rng();
    }
    return lo + static_cast<std::int64_t>(draw % span);
}

/// Fisher-Yates, walking from the back.
template <typename T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
    if (items.size() < 2) {
        return;
    }
    for (std::size_t i = items.size() - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i)));
        using std::swap;
        swap(items[i], items[j]);
    }
}

}  // namespace cafforge
