#pragma once

#include <cstdint>
#include <random>

namespace optecho {

// Reproducible random stream. Streams are keyed by (seed, stream index) so
// work split across chunks or scan points draws identical samples whether it
// runs serially or in parallel. All variate transforms are implemented here
// rather than with std::*_distribution, whose output is implementation
// defined; a given (seed, stream) therefore yields the same sequence on any
// platform with the same floating-point libm.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0);

  /// Uniform double in [0, 1).
  double uniform();

  /// Standard normal via Box-Muller (pairs cached).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Poisson variate; exact for any mean >= 0 (Knuth product method below
  /// mean 10, Hormann's PTRS transformed rejection above).
  std::int64_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace optecho
