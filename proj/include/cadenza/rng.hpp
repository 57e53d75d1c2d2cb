#pragma once

#include <cstdint>
#include <string_view>

namespace cadenza {

// Deterministic 64-bit generator (splitmix64). Used for all stochastic
// content instead of <random> distributions, whose output is not
// reproducible across standard library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [-1, 1).
    double next_bipolar() { return 2.0 * next_unit() - 1.0; }

    // Uniform integer in [0, bound]. Modulo bias is negligible for the
    // bounds used here (segment offsets, grid picks).
    uint64_t next_below(uint64_t bound_inclusive) {
        return next_u64() % (bound_inclusive + 1);
    }

private:
    uint64_t state_;
};

// FNV-1a over arbitrary strings, for deriving per-unit seeds from
// (global seed, track id, listener id) without ordering effects.
inline uint64_t hash64(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t hash64(uint64_t v, uint64_t h = 0xcbf29ce484222325ULL) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace cadenza
