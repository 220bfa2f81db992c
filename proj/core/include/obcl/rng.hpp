#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace obcl {

// All randomness flows from one root seed; components draw from named
// sub-streams so grid cells and modules stay independent and reproducible.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Deterministic engine for the sub-stream (seed, name, index).
inline std::mt19937_64 stream_rng(uint64_t seed, std::string_view name, uint64_t index = 0) {
    uint64_t s = splitmix64(seed ^ splitmix64(fnv1a(name) + index));
    return std::mt19937_64(s);
}

}  // namespace obcl
