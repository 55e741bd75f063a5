#pragma once

#include <string>

#include "flowbench/losses.hpp"

namespace flowbench {

/// The five target constructions of the memorization-gap protocol:
/// paired targets keep all structure, shuffled_R destroys the data
/// coupling, shuffled_PF destroys reward structure but keeps the
/// environment's flow structure (a true policy of a shuffled reward), and
/// random_PF destroys both (logits drawn once from the magnitude range of
/// the true log edge flows, then normalized per state).
enum class MemorizeKind : std::uint8_t {
  paired_R = 0,
  shuffled_R = 1,
  paired_PF = 2,
  shuffled_PF = 3,
  random_PF = 4,
};

const char* memorize_kind_name(MemorizeKind k);
MemorizeKind memorize_kind_from_name(const std::string& name);

RegressionTargets memorization_targets(const StateSpace& space, const RewardTable& rewards,
                                       MemorizeKind kind, std::uint64_t seed);

}  // namespace flowbench
