#include "flowbench/losses.hpp"

#include <cmath>

namespace flowbench {

int LossContext::pos(StateId s) const {
  auto it = batch_pos->find(s);
  if (it == batch_pos->end()) throw FlowbenchError("state missing from loss batch");
  return it->second;
}

double LossContext::log_pb_step(StateId child) const {
  std::uint32_t begin = space->parent_offsets[child];
  std::uint32_t end = space->parent_offsets[child + 1];
  if (begin == end) throw FlowbenchError("log_pb_step: child has no parents");
  if (!pb_multiplicity_weighted) return -std::log(double(end - begin));
  double total = 0.0;
  for (std::uint32_t p = begin; p < end; ++p) total += space->parent_mult[p];
  // All parent edges of one child share the child's normalizer; the edge
  // multiplicity itself is applied by the caller-selected edge.
  return -std::log(total);
}

namespace {

// log P_F entries along the trajectory (chosen child per step, final
// stop), as one [T+1 x 1] gather off the batch's logp tensor.
NodeId traj_logpf(const LossContext& ctx, const Trajectory& traj) {
  std::vector<std::pair<std::int32_t, std::int32_t>> pick;
  for (const auto& [s, action] : traj.steps) {
    int p = ctx.pos(s);
    if (action == Trajectory::kStopAction) {
      pick.emplace_back(0, ctx.batch->stop_pos(p));
    } else {
      pick.emplace_back(0, ctx.batch->child_pos(p, static_cast<int>(action)));
    }
  }
  return ctx.tape->gather_flat({ctx.batch->logp}, std::move(pick));
}

std::vector<double> traj_logpb_prefix(const LossContext& ctx, const Trajectory& traj) {
  // Prefix sums of log P_B over the steps (stop step contributes 0).
  std::vector<double> csb(traj.steps.size() + 1, 0.0);
  for (std::size_t i = 0; i + 1 < traj.steps.size(); ++i) {
    StateId child = traj.steps[i + 1].first;
    double lpb = ctx.log_pb_step(child);
    if (ctx.pb_multiplicity_weighted) {
      StateId parent = traj.steps[i].first;
      std::uint32_t edge = ctx.space->child_offsets[parent] + traj.steps[i].second;
      lpb += std::log(double(ctx.space->child_mult[edge]));
    }
    csb[i + 1] = csb[i] + lpb;
  }
  csb[traj.steps.size()] = csb[traj.steps.size() - 1];  // stop: log P_B = 0
  return csb;
}

double terminal_log_reward(const LossContext& ctx, const Trajectory& traj) {
  return ctx.rewards->log_r[ctx.space->terminal_index[traj.terminal]];
}

}  // namespace

NodeId subtb_loss(const LossContext& ctx, const Trajectory& traj) {
  if (!traj.complete) throw FlowbenchError("subtb_loss requires a complete trajectory");
  Tape& tape = *ctx.tape;
  const std::size_t T1 = traj.steps.size();  // transitions incl. stop

  // x = [log F(s_0..s_T; theta), log R(s_T)] (terminal fixed, no grad).
  std::vector<std::pair<std::int32_t, std::int32_t>> pick;
  for (const auto& [s, action] : traj.steps) {
    (void)action;
    pick.emplace_back(0, ctx.pos(s));
  }
  pick.emplace_back(1, 0);
  NodeId log_r = tape.constant(Tensor::scalar(terminal_log_reward(ctx, traj)));
  NodeId x = tape.gather_flat({ctx.batch->log_flow, log_r}, std::move(pick));

  NodeId pf = traj_logpf(ctx, traj);          // [T+1 x 1]
  NodeId cs = tape.cumsum_exclusive(pf);      // [T+2 x 1]

  auto csb = traj_logpb_prefix(ctx, traj);
  NodeId csb_node = tape.constant(Tensor::column(std::move(csb)));

  // a_k = x_k - cs_k + csb_k; every pair difference a_n - a_m is the
  // signed log balance ratio of the subtrajectory (n, m).
  NodeId a = tape.add(tape.sub(x, cs), csb_node);
  NodeId mean = tape.pairdiff_sq_mean(a);
  if (ctx.subtb_mean) return mean;
  double pairs = double(T1 + 1) * double(T1) / 2.0;
  return tape.scale(mean, pairs);
}

NodeId tb_loss(const LossContext& ctx, const Trajectory& traj) {
  if (!traj.complete) throw FlowbenchError("tb_loss requires a complete trajectory");
  if (ctx.log_z < 0) throw FlowbenchError("tb_loss requires a bound log_z parameter");
  Tape& tape = *ctx.tape;

  NodeId pf_sum = tape.sum_all(traj_logpf(ctx, traj));
  auto csb = traj_logpb_prefix(ctx, traj);
  double log_r = terminal_log_reward(ctx, traj);
  NodeId shift = tape.constant(Tensor::scalar(log_r + csb.back()));
  NodeId residual = tape.sub(tape.add(ctx.log_z, pf_sum), shift);
  return tape.square(residual);
}

NodeId fm_loss(const LossContext& ctx, const Trajectory& traj) {
  if (!traj.complete) throw FlowbenchError("fm_loss requires a complete trajectory");
  Tape& tape = *ctx.tape;
  const StateSpace& space = *ctx.space;

  std::vector<std::int32_t> in_offsets{0}, in_members;
  std::vector<std::int32_t> out_offsets{0}, out_members;
  std::vector<double> out_extra;
  int groups = 0;
  for (const auto& [s, action] : traj.steps) {
    (void)action;
    if (s == space.root) continue;
    // Inflow: every parent edge leading into s.
    for (std::uint32_t p = space.parent_offsets[s]; p < space.parent_offsets[s + 1]; ++p) {
      int ppos = ctx.pos(space.parent_ids[p]);
      in_members.push_back(ctx.batch->child_pos(ppos, space.parent_child_slot[p]));
    }
    in_offsets.push_back(static_cast<std::int32_t>(in_members.size()));
    // Outflow: own child edges plus the reward at terminable states.
    int spos = ctx.pos(s);
    for (int k = 0; k < ctx.batch->nchildren[spos]; ++k) {
      out_members.push_back(ctx.batch->child_pos(spos, k));
    }
    out_offsets.push_back(static_cast<std::int32_t>(out_members.size()));
    out_extra.push_back(space.is_terminable(s)
                            ? ctx.rewards->log_r[space.terminal_index[s]]
                            : kNegInf);
    ++groups;
  }
  if (groups == 0) throw FlowbenchError("fm_loss: trajectory has no non-root states");

  NodeId inflow = tape.group_logsumexp(ctx.batch->raw, std::move(in_offsets),
                                       std::move(in_members));
  NodeId outflow = tape.group_logsumexp(ctx.batch->raw, std::move(out_offsets),
                                        std::move(out_members), std::move(out_extra));
  NodeId sq = tape.square(tape.sub(inflow, outflow));
  Tensor weights(1, groups);
  for (int g = 0; g < groups; ++g) weights.v[g] = 1.0 / double(groups);
  return tape.matmul(tape.constant(std::move(weights)), sq);
}

const char* distill_kind_name(DistillKind k) {
  switch (k) {
    case DistillKind::log_edge_flow: return "log_edge_flow";
    case DistillKind::log_pf: return "log_pf";
    case DistillKind::log_reward: return "log_reward";
  }
  return "?";
}

DistillKind distill_kind_from_name(const std::string& name) {
  if (name == "log_edge_flow") return DistillKind::log_edge_flow;
  if (name == "log_pf") return DistillKind::log_pf;
  if (name == "log_reward") return DistillKind::log_reward;
  throw std::invalid_argument("unknown distill kind: " + name);
}

RegressionTargets targets_from_flows(const StateSpace& space, const FlowTable& flows,
                                     DistillKind kind) {
  RegressionTargets t;
  t.kind = kind;
  if (kind == DistillKind::log_pf) {
    t.edge_values = flows.log_pf_edge;
    t.stop_values = flows.log_pf_stop;
  } else if (kind == DistillKind::log_edge_flow) {
    t.edge_values = flows.log_edge_flow;
    t.stop_values = flows.log_stop_flow;
  } else {
    throw std::invalid_argument("targets_from_flows: use targets_log_reward for log_reward");
  }
  (void)space;
  return t;
}

RegressionTargets targets_log_reward(const StateSpace& space, const RewardTable& rewards) {
  RegressionTargets t;
  t.kind = DistillKind::log_reward;
  t.scalar_values = rewards.log_r;
  (void)space;
  return t;
}

NodeId distill_loss(const LossContext& ctx, std::span<const StateId> states,
                    const RegressionTargets& targets) {
  Tape& tape = *ctx.tape;
  const StateSpace& space = *ctx.space;

  if (targets.kind == DistillKind::log_reward) {
    std::vector<std::pair<std::int32_t, std::int32_t>> pick;
    std::vector<double> target_vals;
    for (StateId s : states) {
      std::uint32_t t = space.terminal_index[s];
      if (t == kInvalidState) throw FlowbenchError("log_reward regression needs terminable states");
      pick.emplace_back(0, ctx.pos(s));
      target_vals.push_back(targets.scalar_values[t]);
    }
    NodeId pred = tape.gather_flat({ctx.batch->log_flow}, std::move(pick));
    NodeId diff = tape.sub(pred, tape.constant(Tensor::column(std::move(target_vals))));
    NodeId sq = tape.square(diff);
    Tensor weights(1, static_cast<int>(states.size()));
    for (auto& w : weights.v) w = 1.0 / double(states.size());
    return tape.matmul(tape.constant(std::move(weights)), sq);
  }

  NodeId source = targets.kind == DistillKind::log_pf ? ctx.batch->logp : ctx.batch->raw;
  std::vector<std::pair<std::int32_t, std::int32_t>> pick;
  std::vector<double> target_vals;
  for (StateId s : states) {
    int p = ctx.pos(s);
    for (int k = 0; k < ctx.batch->nchildren[p]; ++k) {
      pick.emplace_back(0, ctx.batch->child_pos(p, k));
      target_vals.push_back(targets.edge_values[space.child_offsets[s] + k]);
    }
    if (ctx.batch->has_stop[p]) {
      pick.emplace_back(0, ctx.batch->stop_pos(p));
      target_vals.push_back(targets.stop_values[space.terminal_index[s]]);
    }
  }
  if (pick.empty()) throw FlowbenchError("distill_loss: empty prediction set");
  NodeId pred = tape.gather_flat({source}, std::move(pick));
  int n = static_cast<int>(target_vals.size());
  NodeId diff = tape.sub(pred, tape.constant(Tensor::column(std::move(target_vals))));
  NodeId sq = tape.square(diff);
  Tensor weights(1, n);
  for (auto& w : weights.v) w = 1.0 / double(n);
  return tape.matmul(tape.constant(std::move(weights)), sq);
}

}  // namespace flowbench
