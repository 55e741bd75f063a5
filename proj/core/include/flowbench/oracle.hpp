#pragma once

#include <functional>
#include <span>
#include <vector>

#include "flowbench/rewards.hpp"
#include "flowbench/state_space.hpp"

namespace flowbench {

/// True flows under a uniform backward policy, all in the log domain.
/// Conservation: F(s) = R(s)*[terminable] + sum_children F(s->s').
struct FlowTable {
  std::vector<double> log_state_flow;  // [S]
  std::vector<double> log_edge_flow;   // [E], aligned with the child CSR
  std::vector<double> log_stop_flow;   // [T] = log R at terminable states
  std::vector<double> log_pf_edge;     // [E] true P_F per edge
  std::vector<double> log_pf_stop;     // [T] true P_F of the stop action
};

/// Log-probability per terminable state. log-sum-exp of log_p is 0 for any
/// normalized policy; log_z records the normalizer of true distributions.
struct DistributionTable {
  std::vector<double> log_p;  // [T]
  double log_z = 0.0;
};

/// Reverse-topological sweep: terminable states start at their reward,
/// each state's settled flow is pushed to its parents through P_B, and the
/// induced true P_F is F(s->s')/F(s). P_B is uniform over canonical
/// parents by default; the flag weights parents by edge multiplicity.
FlowTable true_flows(const StateSpace& space, const RewardTable& rewards,
                     bool multiplicity_weighted_pb = false);

/// log p(x) = log R(x) - log sum R.
DistributionTable true_terminal_logprobs(const RewardTable& rewards);

/// The exact policy that reaches every terminal with equal probability:
/// true flows of the constant reward.
FlowTable uniform_terminal_policy(const StateSpace& space);

/// Batched per-state policy distributions over canonical children + stop.
/// Rows align with the space's child CSR; stop_logp is meaningful only for
/// terminable states (-inf otherwise).
class PolicyEvaluator {
 public:
  struct Row {
    std::vector<double> child_logp;
    double stop_logp = kNegInf;
  };

  virtual ~PolicyEvaluator() = default;
  virtual std::vector<Row> evaluate(const StateSpace& space, std::span<const StateId> states) = 0;
};

/// Reads the true P_F out of a FlowTable.
class FlowPolicyEvaluator final : public PolicyEvaluator {
 public:
  explicit FlowPolicyEvaluator(const FlowTable& flows) : flows_(&flows) {}
  std::vector<Row> evaluate(const StateSpace& space, std::span<const StateId> states) override;

 private:
  const FlowTable* flows_;
};

/// Forward topological sweep accumulating visitation probability;
/// log p(x) = log p_v(x) + log P(stop|x). Policy rows are checked for
/// normalization within 1e-6; a violation raises an error naming the
/// state. Policy evaluations are batched, batch_size states per call.
DistributionTable exact_terminal_logprobs(const StateSpace& space, PolicyEvaluator& policy,
                                          std::size_t batch_size = 1024);

/// Exhaustive flow-conservation audit; returns the worst relative error.
double max_conservation_error(const StateSpace& space, const RewardTable& rewards,
                              const FlowTable& flows);

std::string distribution_to_csv(const StateSpace& space, const DistributionTable& dist);
std::string flow_table_to_csv(const StateSpace& space, const FlowTable& flows);

}  // namespace flowbench
