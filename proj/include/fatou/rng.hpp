#pragma once

#include <cmath>
#include <cstdint>

#include "fatou/geometry.hpp"

namespace fatou {

/// SplitMix64 finalizer; the mixing step of the counter-based streams below.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_key(std::uint64_t a, std::uint64_t b) { return mix64(a ^ mix64(b + 0x632be59bd9b4e019ULL)); }

template <typename... Rest>
constexpr std::uint64_t hash_key(std::uint64_t a, std::uint64_t b, Rest... rest) {
  return hash_key(hash_key(a, b), rest...);
}

/// Counter-based stream: draw i is a pure function of (key, i), so results
/// do not depend on which thread consumes which stream.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++)); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform direction on the unit sphere of the given ambient dimension (2 or 3).
  Point direction(int dim) {
    if (dim == 2) {
      const double a = 2.0 * kPi * uniform();
      return {std::cos(a), std::sin(a), 0.0};
    }
    const double z = 2.0 * uniform() - 1.0;
    const double a = 2.0 * kPi * uniform();
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {s * std::cos(a), s * std::sin(a), z};
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace fatou
