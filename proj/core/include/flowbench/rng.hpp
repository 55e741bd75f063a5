#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace flowbench {

/// Deterministic pseudo-random stream. Distributions are implemented here
/// rather than taken from <random> because the standard leaves
/// distribution algorithms implementation-defined, and run artifacts must
/// be byte-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 bits of mantissa.
  double uniform();

  /// Uniform integer in [0, n), unbiased (rejection sampling). n > 0.
  std::uint64_t uniform_below(std::uint64_t n);

  /// Standard normal via Box-Muller (both values used, cached).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// k distinct indices drawn uniformly from [0, n) without replacement,
  /// in draw order (partial Fisher-Yates on an index table).
  std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n, std::uint64_t k);

 private:
  std::uint64_t s_[4];
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

/// Derives a child seed from a root seed and a stream label. Adding new
/// labelled components never perturbs existing streams.
std::uint64_t derive_seed(std::uint64_t root_seed, std::string_view label, std::uint64_t index = 0);

}  // namespace flowbench
