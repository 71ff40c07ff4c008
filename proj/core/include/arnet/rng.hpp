#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace arnet {

/// Mixes a base seed with a stream name so that independent consumers
/// (init, dropout, sampling, synth) never share a random sequence.
std::uint64_t derive_seed(std::uint64_t base_seed, std::string_view stream);

/// Same, with an additional integer index (per run, per video, ...).
std::uint64_t derive_seed(std::uint64_t base_seed, std::string_view stream,
                          std::uint64_t index);

/// Platform-stable random source.
///
/// The standard distributions are implementation-defined, so every draw is
/// derived from raw mt19937_64 output here. Identical seeds give identical
/// sequences on every conforming toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer on [0, n). Unbiased (rejection sampling). n must be > 0.
  std::size_t index(std::size_t n);

  /// Standard normal via Box-Muller. Caches the second variate.
  double normal();

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace arnet
