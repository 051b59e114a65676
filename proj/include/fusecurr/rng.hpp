#pragma once

#include <cmath>
#include <cstdint>

// Deterministic, platform-independent randomness. Everything that draws
// random numbers in this project goes through these helpers; std::
// distributions are avoided because their output is implementation-defined.

namespace fusecurr::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

/// SplitMix64 finalizer. Bijective on 64-bit values.
inline std::uint64_t mix(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Derive an independent stream seed from a base seed and up to three tags.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t a,
                            std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t h = mix(seed ^ 0x517cc1b727220a95ull);
    h = mix(h ^ a);
    h = mix(h ^ b);
    h = mix(h ^ c);
    return h;
}

/// Map 64 random bits to a double in [0, 1).
inline double to_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Counter-based standard normal draw: value depends only on (seed, index).
/// Box-Muller over two SplitMix64 outputs; one normal per index.
inline double normal(std::uint64_t seed, std::uint64_t index) {
    const double u1 = 1.0 - to_unit(mix(seed + 2 * index * kGolden));        // (0, 1]
    const double u2 = to_unit(mix(seed + (2 * index + 1) * kGolden));        // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Sequential SplitMix64 stream for shuffles and crop offsets.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += kGolden;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    double uniform() { return to_unit(next()); }

    /// Uniform integer in [0, n). Lemire's multiply-shift; bias is
    /// negligible for the small n used here and the result is portable.
    int below(int n) {
        using u128 = unsigned __int128;
        return static_cast<int>((u128(next()) * u128(n)) >> 64);
    }

    double normal() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    std::uint64_t state_;
};

} // namespace fusecurr::rng
