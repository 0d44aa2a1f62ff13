#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace proxyaudit {

/// SplitMix64 (Steele, Lea & Flood 2014). The whole state is one 64-bit word:
///
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
///
/// Derived draws are defined here too, so that any implementation following
/// these formulas reproduces the same splits and synthetic datasets:
///   uniform()   = (next() >> 11) * 2^-53                      in [0, 1)
///   below(k)    = next() mod k
///   normal()    = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)          one Box-Muller draw
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  std::uint64_t below(std::uint64_t bound) { return next() % bound; }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::uint64_t state_;
};

/// FNV-1a over the bytes of `text`.
constexpr std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Independent stream for one named column: seeded with seed XOR fnv1a64(name).
/// Adding a column to a generator never perturbs the draws of existing ones.
inline SplitMix64 substream(std::uint64_t seed, std::string_view name) {
  return SplitMix64(seed ^ fnv1a64(name));
}

}  // namespace proxyaudit
