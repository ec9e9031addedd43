#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace mdlpdf {

/// Seeded generator with a platform-independent output sequence.
///
/// The engine is std::mt19937_64, whose output is fixed by the standard.
/// Nothing here goes through std::*_distribution (their algorithms are
/// implementation-defined): uniforms use the top 53 bits of each draw and
/// Gaussians use the inverse normal CDF, so a given seed yields identical
/// samples on every conforming toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform_open() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() { return inverse_normal_cdf(uniform_open()); }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Exponential(1) variate.
  double exponential();

  /// Index drawn with probability proportional to `weights`.
  std::size_t categorical(std::span<const double> weights);

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  /// Inverse of the standard normal CDF (Wichura's AS241, ~1e-16 relative accuracy).
  static double inverse_normal_cdf(double p);

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent stream seed from a master seed (SplitMix64 finalizer).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept;

}  // namespace mdlpdf
