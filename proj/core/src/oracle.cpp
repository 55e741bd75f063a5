#include "flowbench/oracle.hpp"

#include <cmath>
#include <sstream>

namespace flowbench {

FlowTable true_flows(const StateSpace& space, const RewardTable& rewards,
                     bool multiplicity_weighted_pb) {
  const std::size_t S = space.size();
  if (rewards.log_r.size() != space.num_terminals()) {
    throw std::invalid_argument("reward table does not cover the space's terminable states");
  }

  FlowTable ft;
  ft.log_state_flow.assign(S, kNegInf);
  ft.log_edge_flow.assign(space.num_edges(), kNegInf);
  ft.log_stop_flow.assign(space.num_terminals(), kNegInf);
  ft.log_pf_edge.assign(space.num_edges(), kNegInf);
  ft.log_pf_stop.assign(space.num_terminals(), kNegInf);

  for (std::size_t t = 0; t < space.num_terminals(); ++t) {
    ft.log_stop_flow[t] = rewards.log_r[t];
    ft.log_state_flow[space.terminals[t]] = rewards.log_r[t];
  }

  // Reverse topological order: a state's flow is settled before it is
  // distributed to its parents.
  for (auto it = space.topo_order.rbegin(); it != space.topo_order.rend(); ++it) {
    StateId c = *it;
    double log_fc = ft.log_state_flow[c];
    if (log_fc == kNegInf) continue;
    std::uint32_t pbegin = space.parent_offsets[c];
    std::uint32_t pend = space.parent_offsets[c + 1];
    if (pbegin == pend) continue;

    double log_norm;
    if (multiplicity_weighted_pb) {
      double total = 0.0;
      for (std::uint32_t p = pbegin; p < pend; ++p) total += space.parent_mult[p];
      log_norm = std::log(total);
    } else {
      log_norm = std::log(double(pend - pbegin));
    }

    for (std::uint32_t p = pbegin; p < pend; ++p) {
      StateId parent = space.parent_ids[p];
      double log_pb = multiplicity_weighted_pb
                          ? std::log(double(space.parent_mult[p])) - log_norm
                          : -log_norm;
      double log_edge = log_fc + log_pb;
      std::uint32_t edge = space.child_offsets[parent] + space.parent_child_slot[p];
      ft.log_edge_flow[edge] = log_edge;
      ft.log_state_flow[parent] = logaddexp(ft.log_state_flow[parent], log_edge);
    }
  }

  for (std::size_t s = 0; s < S; ++s) {
    double log_fs = ft.log_state_flow[s];
    for (std::uint32_t e = space.child_offsets[s]; e < space.child_offsets[s + 1]; ++e) {
      ft.log_pf_edge[e] = ft.log_edge_flow[e] - log_fs;
    }
    std::uint32_t t = space.terminal_index[s];
    if (t != kInvalidState) ft.log_pf_stop[t] = ft.log_stop_flow[t] - log_fs;
  }

  return ft;
}

DistributionTable true_terminal_logprobs(const RewardTable& rewards) {
  DistributionTable dist;
  dist.log_z = logsumexp(rewards.log_r);
  dist.log_p.resize(rewards.log_r.size());
  for (std::size_t i = 0; i < rewards.log_r.size(); ++i) {
    dist.log_p[i] = rewards.log_r[i] - dist.log_z;
  }
  return dist;
}

FlowTable uniform_terminal_policy(const StateSpace& space) {
  RewardTable constant;
  constant.task = "constant";
  constant.provenance = RewardProvenance::constant;
  constant.log_r.assign(space.num_terminals(), 0.0);
  return true_flows(space, constant);
}

std::vector<PolicyEvaluator::Row> FlowPolicyEvaluator::evaluate(const StateSpace& space,
                                                                std::span<const StateId> states) {
  std::vector<Row> rows(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    StateId s = states[i];
    Row& row = rows[i];
    row.child_logp.assign(flows_->log_pf_edge.begin() + space.child_offsets[s],
                          flows_->log_pf_edge.begin() + space.child_offsets[s + 1]);
    std::uint32_t t = space.terminal_index[s];
    row.stop_logp = t == kInvalidState ? kNegInf : flows_->log_pf_stop[t];
  }
  return rows;
}

DistributionTable exact_terminal_logprobs(const StateSpace& space, PolicyEvaluator& policy,
                                          std::size_t batch_size) {
  const std::size_t S = space.size();
  std::vector<double> log_pv(S, kNegInf);
  log_pv[space.root] = 0.0;

  DistributionTable dist;
  dist.log_p.assign(space.num_terminals(), kNegInf);

  std::vector<StateId> batch;
  for (std::size_t start = 0; start < S; start += batch_size) {
    std::size_t end = std::min(S, start + batch_size);
    batch.assign(space.topo_order.begin() + start, space.topo_order.begin() + end);
    auto rows = policy.evaluate(space, batch);
    if (rows.size() != batch.size()) throw FlowbenchError("policy evaluator returned wrong row count");

    for (std::size_t i = 0; i < batch.size(); ++i) {
      StateId s = batch[i];
      const auto& row = rows[i];
      if (row.child_logp.size() != space.num_children(s)) {
        throw FlowbenchError("policy row arity mismatch at state " + std::to_string(s));
      }

      // Normalization audit over children + stop.
      double lse = kNegInf;
      for (double lp : row.child_logp) lse = logaddexp(lse, lp);
      if (space.is_terminable(s)) lse = logaddexp(lse, row.stop_logp);
      if (std::abs(lse) > 1e-6 || !std::isfinite(lse)) {
        throw FlowbenchError("policy distribution not normalized at state " + std::to_string(s) +
                             " (" + space.state_text(s) + "), log-sum " + std::to_string(lse));
      }

      double lpv = log_pv[s];
      std::uint32_t t = space.terminal_index[s];
      if (t != kInvalidState) {
        dist.log_p[t] = lpv == kNegInf ? kNegInf : lpv + row.stop_logp;
      }
      if (lpv == kNegInf) continue;
      for (std::size_t k = 0; k < row.child_logp.size(); ++k) {
        StateId c = space.child_ids[space.child_offsets[s] + k];
        log_pv[c] = logaddexp(log_pv[c], lpv + row.child_logp[k]);
      }
    }
  }

  dist.log_z = 0.0;
  return dist;
}

double max_conservation_error(const StateSpace& space, const RewardTable& rewards,
                              const FlowTable& flows) {
  double worst = 0.0;
  for (std::size_t s = 0; s < space.size(); ++s) {
    double acc = kNegInf;
    std::uint32_t t = space.terminal_index[s];
    if (t != kInvalidState) acc = rewards.log_r[t];
    for (std::uint32_t e = space.child_offsets[s]; e < space.child_offsets[s + 1]; ++e) {
      acc = logaddexp(acc, flows.log_edge_flow[e]);
    }
    double expect = flows.log_state_flow[s];
    double rel = std::abs(std::expm1(acc - expect));
    worst = std::max(worst, rel);
  }
  return worst;
}

std::string distribution_to_csv(const StateSpace& space, const DistributionTable& dist) {
  std::ostringstream os;
  os << "state,log_p\n";
  char buf[64];
  for (std::size_t i = 0; i < dist.log_p.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", dist.log_p[i]);
    os << space.terminals[i] << "," << buf << "\n";
  }
  return os.str();
}

std::string flow_table_to_csv(const StateSpace& space, const FlowTable& flows) {
  std::ostringstream os;
  os << "state,log_flow\n";
  char buf[64];
  for (std::size_t s = 0; s < space.size(); ++s) {
    std::snprintf(buf, sizeof(buf), "%.17g", flows.log_state_flow[s]);
    os << s << "," << buf << "\n";
  }
  return os.str();
}

}  // namespace flowbench
