#pragma once

#include <map>
#include <span>
#include <unordered_map>
#include <vector>

#include "flowbench/oracle.hpp"
#include "flowbench/policy_model.hpp"
#include "flowbench/state_space.hpp"
#include "flowbench/tape.hpp"

namespace flowbench {

/// Shared view of one evaluated batch: which tape row serves each state.
struct LossContext {
  Tape* tape = nullptr;
  const StateSpace* space = nullptr;
  const RewardTable* rewards = nullptr;
  const PolicyBatch* batch = nullptr;
  const std::unordered_map<StateId, int>* batch_pos = nullptr;
  NodeId log_z = -1;            // bound log_z parameter (TB only)
  bool subtb_mean = true;       // mean over subtrajectory pairs vs plain sum
  bool pb_multiplicity_weighted = false;

  int pos(StateId s) const;
  double log_pb_step(StateId child) const;  // log P_B of entering `child`
};

/// Squared log-ratio balance error over every subtrajectory pair of a
/// complete trajectory, lambda = 1. The terminal endpoint's flow is fixed
/// to log R(terminal) with no gradient; the final stop probability is part
/// of the P_F chain.
NodeId subtb_loss(const LossContext& ctx, const Trajectory& traj);

/// Whole-trajectory special case with the learned log Z normalizer.
NodeId tb_loss(const LossContext& ctx, const Trajectory& traj);

/// Per-state inflow/outflow balance on the trajectory's non-root states;
/// edge flows are the unnormalized canonical-action logits. Parent states
/// must be present in the batch.
NodeId fm_loss(const LossContext& ctx, const Trajectory& traj);

enum class DistillKind { log_edge_flow = 0, log_pf = 1, log_reward = 2 };

const char* distill_kind_name(DistillKind k);
DistillKind distill_kind_from_name(const std::string& name);

/// Regression targets over the whole space, aligned with the child CSR
/// (edge_values), terminal slots (stop_values/scalar_values).
struct RegressionTargets {
  DistillKind kind = DistillKind::log_pf;
  std::vector<double> edge_values;    // [E]
  std::vector<double> stop_values;    // [T]
  std::vector<double> scalar_values;  // [T] (log_reward kind)
  // Pre-normalization draws of the random_PF construction, kept for range
  // audits.
  std::vector<double> raw_edge_values;
  std::vector<double> raw_stop_values;
};

RegressionTargets targets_from_flows(const StateSpace& space, const FlowTable& flows,
                                     DistillKind kind);
RegressionTargets targets_log_reward(const StateSpace& space, const RewardTable& rewards);

/// Mean squared error between the model view named by targets.kind and the
/// target values, flat over every predicted entry of the batch.
/// log_edge_flow reads the unnormalized logits (absolute magnitudes
/// matter); log_pf reads the per-state log-softmax; log_reward reads the
/// state log-flow head at terminable states.
NodeId distill_loss(const LossContext& ctx, std::span<const StateId> states,
                    const RegressionTargets& targets);

}  // namespace flowbench
