#pragma once

#include <cmath>
#include <cstdint>

namespace tvlogit {

// SplitMix64 finalizer: a bijective mix on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based stream: draw i is a pure function of (key, i), so draws can
// be evaluated in any order and from any number of worker threads with
// identical results.  Keys are built by chaining the mix over a seed and up
// to two stream ids (for example replicate index and purpose tag).
struct RngStream {
  std::uint64_t key = 0;

  static constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ULL;

  static RngStream keyed(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t k = mix64(seed + golden);
    k = mix64(k + a + golden);
    k = mix64(k + b + golden);
    return RngStream{k};
  }

  std::uint64_t bits(std::uint64_t counter) const {
    return mix64(key + (counter + 1) * golden);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const {
    return double(bits(counter) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }

  // Standard normal via Box-Muller; consumes counters 2i and 2i+1.
  double normal(std::uint64_t counter) const {
    double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
};

}  // namespace tvlogit
