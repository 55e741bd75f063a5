#include "flowbench/memorization.hpp"

#include <algorithm>
#include <cmath>

#include "flowbench/rng.hpp"

namespace flowbench {

const char* memorize_kind_name(MemorizeKind k) {
  switch (k) {
    case MemorizeKind::paired_R: return "paired_R";
    case MemorizeKind::shuffled_R: return "shuffled_R";
    case MemorizeKind::paired_PF: return "paired_PF";
    case MemorizeKind::shuffled_PF: return "shuffled_PF";
    case MemorizeKind::random_PF: return "random_PF";
  }
  return "?";
}

MemorizeKind memorize_kind_from_name(const std::string& name) {
  if (name == "paired_R") return MemorizeKind::paired_R;
  if (name == "shuffled_R") return MemorizeKind::shuffled_R;
  if (name == "paired_PF") return MemorizeKind::paired_PF;
  if (name == "shuffled_PF") return MemorizeKind::shuffled_PF;
  if (name == "random_PF") return MemorizeKind::random_PF;
  throw std::invalid_argument("unknown memorization kind: " + name);
}

RegressionTargets memorization_targets(const StateSpace& space, const RewardTable& rewards,
                                       MemorizeKind kind, std::uint64_t seed) {
  switch (kind) {
    case MemorizeKind::paired_R:
      return targets_log_reward(space, rewards);
    case MemorizeKind::shuffled_R:
      return targets_log_reward(space, shuffle_rewards(rewards, seed));
    case MemorizeKind::paired_PF:
      return targets_from_flows(space, true_flows(space, rewards), DistillKind::log_pf);
    case MemorizeKind::shuffled_PF:
      // True policy of a shuffled reward: reward structure destroyed,
      // environment structure retained.
      return targets_from_flows(space, true_flows(space, shuffle_rewards(rewards, seed)),
                                DistillKind::log_pf);
    case MemorizeKind::random_PF: {
      FlowTable flows = true_flows(space, rewards);
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      auto widen = [&](double v) {
        if (std::isfinite(v)) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      };
      for (double v : flows.log_edge_flow) widen(v);
      for (double v : flows.log_stop_flow) widen(v);

      RegressionTargets t;
      t.kind = DistillKind::log_pf;
      t.edge_values.resize(space.num_edges());
      t.stop_values.resize(space.num_terminals());
      Rng rng(derive_seed(seed, "random-pf"));
      for (double& v : t.edge_values) v = lo + (hi - lo) * rng.uniform();
      for (double& v : t.stop_values) v = lo + (hi - lo) * rng.uniform();
      t.raw_edge_values = t.edge_values;
      t.raw_stop_values = t.stop_values;

      // Normalize per state over children + stop so the targets are
      // valid log-policies.
      for (std::size_t s = 0; s < space.size(); ++s) {
        double lse = kNegInf;
        for (std::uint32_t e = space.child_offsets[s]; e < space.child_offsets[s + 1]; ++e) {
          lse = logaddexp(lse, t.edge_values[e]);
        }
        std::uint32_t ti = space.terminal_index[s];
        if (ti != kInvalidState) lse = logaddexp(lse, t.stop_values[ti]);
        for (std::uint32_t e = space.child_offsets[s]; e < space.child_offsets[s + 1]; ++e) {
          t.edge_values[e] -= lse;
        }
        if (ti != kInvalidState) t.stop_values[ti] -= lse;
      }
      return t;
    }
  }
  throw std::invalid_argument("unhandled memorization kind");
}

}  // namespace flowbench
