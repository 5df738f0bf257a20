#ifndef BSQ_RNG_HPP
#define BSQ_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

#include "bsq/common.hpp"

namespace bsq {

/// splitmix64 round; used to derive independent per-trial / per-call seeds
/// from a master seed without correlated streams.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Deterministic random stream. The mt19937_64 engine is fully specified by
/// the standard and the transforms below avoid std::*_distribution, whose
/// output is implementation-defined, so draws are reproducible across
/// compilers and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (both variates consumed, one cached).
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    cached_ = r * std::sin(kTwoPi * u2);
    have_cached_ = true;
    return r * std::cos(kTwoPi * u2);
  }

  /// Circularly-symmetric complex Gaussian CN(0, var).
  cxd cnormal(double var) {
    const double s = std::sqrt(var / 2.0);
    return {s * normal(), s * normal()};
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace bsq

#endif  // BSQ_RNG_HPP
