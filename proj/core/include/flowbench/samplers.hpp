#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "flowbench/oracle.hpp"
#include "flowbench/policy_model.hpp"
#include "flowbench/rng.hpp"
#include "flowbench/state_space.hpp"

namespace flowbench {

/// P_alpha(.|s) = (1-alpha) * P_F(.|s; theta) + alpha * P_U(.|s), where
/// P_U is the exact uniform-terminal policy.
struct MixtureConfig {
  double alpha = 0.0;
};

/// Samples `count` trajectories from the root in lockstep (one batched
/// policy evaluation per depth). Each trajectory draws from its own
/// labelled stream, so results are independent of batch composition.
/// p_uniform may be null only when alpha = 0.
std::vector<Trajectory> sample_forward_trajectories(const StateSpace& space,
                                                    ModelPolicyEvaluator& policy,
                                                    const FlowTable* p_uniform,
                                                    const MixtureConfig& mix, std::uint64_t seed,
                                                    std::uint64_t first_index, int count);

/// Walks backwards from x picking a parent uniformly among canonical
/// parents until the root, then reverses into a forward trajectory that
/// stops at x.
Trajectory sample_backward_trajectory(const StateSpace& space, StateId x, Rng& rng);

enum class OfflineKind : std::uint8_t {
  uniform = 0,
  reward = 1,
  proxy_on_policy = 2,
  abs_error = 3,
  sq_log_error = 4,
};

const char* offline_kind_name(OfflineKind k);
OfflineKind offline_kind_from_name(const std::string& name);

/// Categorical over a terminal subset. Proxy-dependent kinds are refreshed
/// from the latest exact model distribution; a vanishing total weight
/// falls back to uniform (degenerate at convergence) and flags it.
class OfflineDistribution {
 public:
  OfflineDistribution(OfflineKind kind, std::vector<StateId> support);

  OfflineKind kind() const { return kind_; }
  bool used_fallback() const { return used_fallback_; }

  /// model_logp may be null for kinds that do not need it (uniform,
  /// reward); log-probabilities are indexed by terminal slot.
  void refresh(const StateSpace& space, const RewardTable& rewards,
               const DistributionTable* model_logp, const DistributionTable& true_logp);

  StateId sample(Rng& rng) const;

  std::span<const double> weights() const { return weights_; }
  std::span<const StateId> support() const { return support_; }

 private:
  OfflineKind kind_;
  std::vector<StateId> support_;
  std::vector<double> weights_;  // normalized
  std::vector<double> cumulative_;
  bool used_fallback_ = false;
};

}  // namespace flowbench
