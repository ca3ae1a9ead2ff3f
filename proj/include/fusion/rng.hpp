#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace fusion {

// Counter-based pseudo-random primitives. Every value is a pure function of
// its key words, so any consumer can regenerate any element independently,
// in any order, with no shared stream state.

// splitmix64 finalizer step.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Chain an arbitrary tuple of key words into one 64-bit value:
// h_0 = mix64(k_0), h_i = mix64(h_{i-1} ^ k_i).
constexpr std::uint64_t mix_key(std::initializer_list<std::uint64_t> words) {
    std::uint64_t h = 0x8f1bbcdcbfa53e0bULL;
    for (std::uint64_t w : words) h = mix64(h ^ w);
    return h;
}

// FNV-1a over bytes; used to key per-prompt streams by prompt id.
constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Uniform double in [0, 1) from the top 53 bits.
constexpr double u01(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Uniform double in (0, 1]; never zero, safe under log().
constexpr double u01_open(std::uint64_t bits) {
    return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

// Standard normal via Box-Muller from two counter values.
// normal_at({key...}, i) consumes counters 2i and 2i+1.
double normal_at(std::initializer_list<std::uint64_t> key, std::uint64_t index);

// Uniform in [lo, hi) keyed the same way.
double uniform_at(std::initializer_list<std::uint64_t> key, std::uint64_t index,
                  double lo, double hi);

}  // namespace fusion
