#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace panosum {

/// Deterministic 64-bit generator (splitmix64). Used instead of <random>
/// engines + distributions so that sampling is bit-identical across
/// platforms and standard-library implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, n), n >= 1. Rejection sampling keeps it unbiased.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform_double(double lo, double hi) {
    return lo + (hi - lo) * uniform_double();
  }

  /// Standard normal via Box-Muller (trig form; the rejection-based polar
  /// form would consume a data-dependent number of draws).
  double normal() {
    const double u1 = 1.0 - uniform_double();  // (0, 1], keeps log finite
    const double u2 = uniform_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

private:
  std::uint64_t state_;
};

/// Decorrelated per-stage seed so modules fed from one master seed do not
/// share RNG streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  Rng rng(base ^ (0xD1B54A32D192ED03ull * (stream + 1)) ^
          (0x94D049BB133111EBull * (index + 1)));
  return rng.next_u64();
}

}  // namespace panosum
