#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowbench {

/// Dense index into an enumerated state space. Stable for a fixed
/// environment config and grammar version.
using StateId = std::uint32_t;

inline constexpr StateId kInvalidState = std::numeric_limits<StateId>::max();

enum class EnvKind : std::uint8_t { graph = 0, grid = 1, sequence = 2 };

inline const char* env_kind_name(EnvKind k) {
  switch (k) {
    case EnvKind::graph: return "graph";
    case EnvKind::grid: return "grid";
    case EnvKind::sequence: return "sequence";
  }
  return "?";
}

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without overflow; handles -inf operands.
inline double logaddexp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double hi = a > b ? a : b;
  double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

/// Sequential left-to-right log-sum-exp. The accumulation order is part of
/// the determinism contract: callers rely on bit-identical results.
inline double logsumexp(std::span<const double> xs) {
  double acc = kNegInf;
  for (double x : xs) acc = logaddexp(acc, x);
  return acc;
}

class FlowbenchError : public std::runtime_error {
 public:
  explicit FlowbenchError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace flowbench
