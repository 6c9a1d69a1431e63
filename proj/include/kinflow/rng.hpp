#pragma once

#include <cmath>
#include <cstdint>

namespace kinflow {

/// Counter-based random numbers: every variate is a pure function of
/// (seed, key words), so generation order and worker count cannot change
/// the stream. The mixer is the SplitMix64 finalizer applied to a running
/// combine of the key words.
namespace rng {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t combine(std::uint64_t h, std::uint64_t w) {
    return mix64(h ^ (w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

struct Key {
    std::uint64_t state;

    explicit Key(std::uint64_t seed) : state(mix64(seed)) {}
    Key with(std::uint64_t word) const { return Key{*this, word}; }

  private:
    Key(const Key& k, std::uint64_t word) : state(combine(k.state, word)) {}
};

/// Uniform in (0,1): 53 bits, offset so 0 is never returned.
inline double uniform(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

/// One standard normal per key via Box-Muller (cosine branch only; the
/// second variate is intentionally discarded to keep one-key-one-number).
inline double standard_normal(const Key& key) {
    const std::uint64_t b1 = mix64(key.state ^ 0x5851f42d4c957f2dULL);
    const std::uint64_t b2 = mix64(key.state ^ 0x14057b7ef767814fULL);
    const double u1 = uniform(b1);
    const double u2 = uniform(b2);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

inline double standard_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                              std::uint64_t c, std::uint64_t d) {
    return standard_normal(Key(seed).with(a).with(b).with(c).with(d));
}

}  // namespace rng
}  // namespace kinflow
