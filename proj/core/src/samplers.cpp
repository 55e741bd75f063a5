#include "flowbench/samplers.hpp"

#include <algorithm>
#include <cmath>

namespace flowbench {

std::vector<Trajectory> sample_forward_trajectories(const StateSpace& space,
                                                    ModelPolicyEvaluator& policy,
                                                    const FlowTable* p_uniform,
                                                    const MixtureConfig& mix, std::uint64_t seed,
                                                    std::uint64_t first_index, int count) {
  if (mix.alpha < 0.0 || mix.alpha > 1.0) throw std::invalid_argument("alpha must be in [0, 1]");
  if (mix.alpha > 0.0 && p_uniform == nullptr) {
    throw std::invalid_argument("mixture sampling needs the exact uniform policy");
  }

  std::vector<Trajectory> trajs(count);
  std::vector<Rng> rngs;
  rngs.reserve(count);
  for (int t = 0; t < count; ++t) {
    rngs.emplace_back(derive_seed(seed, "trajectory", first_index + std::uint64_t(t)));
  }

  std::vector<int> active(count);
  for (int t = 0; t < count; ++t) active[t] = t;
  std::vector<StateId> cursor(count, space.root);

  std::vector<StateId> batch_states;
  while (!active.empty()) {
    batch_states.clear();
    for (int t : active) batch_states.push_back(cursor[t]);
    auto rows = policy.evaluate(space, batch_states);

    std::vector<int> still_active;
    for (std::size_t i = 0; i < active.size(); ++i) {
      int t = active[i];
      StateId s = batch_states[i];
      const auto& row = rows[i];
      const double alpha = mix.alpha;

      // Mixture probabilities over canonical children + stop.
      std::size_t nchild = row.child_logp.size();
      double u = rngs[t].uniform();
      double acc = 0.0;
      std::int64_t choice = -1;  // nchild = stop
      for (std::size_t k = 0; k < nchild; ++k) {
        double p = (1.0 - alpha) * std::exp(row.child_logp[k]);
        if (alpha > 0.0) {
          std::uint32_t edge = space.child_offsets[s] + static_cast<std::uint32_t>(k);
          p += alpha * std::exp(p_uniform->log_pf_edge[edge]);
        }
        acc += p;
        if (u < acc) {
          choice = static_cast<std::int64_t>(k);
          break;
        }
      }
      if (choice < 0) {
        if (space.is_terminable(s)) {
          choice = static_cast<std::int64_t>(nchild);
        } else {
          // Rounding pushed u past the child mass of a non-terminable
          // state; take the last child.
          choice = static_cast<std::int64_t>(nchild) - 1;
          if (choice < 0) throw FlowbenchError("state with no children and no stop");
        }
      }

      if (choice == static_cast<std::int64_t>(nchild)) {
        trajs[t].steps.emplace_back(s, Trajectory::kStopAction);
        trajs[t].terminal = s;
        trajs[t].complete = true;
      } else {
        trajs[t].steps.emplace_back(s, static_cast<std::uint32_t>(choice));
        cursor[t] = space.child_ids[space.child_offsets[s] + choice];
        still_active.push_back(t);
      }
    }
    active = std::move(still_active);
  }
  return trajs;
}

Trajectory sample_backward_trajectory(const StateSpace& space, StateId x, Rng& rng) {
  if (!space.is_terminable(x)) throw std::invalid_argument("backward sampling needs a terminable state");

  std::vector<std::pair<StateId, std::uint32_t>> reversed;  // (parent, child slot)
  StateId s = x;
  while (s != space.root) {
    std::uint32_t begin = space.parent_offsets[s];
    std::uint32_t n = space.parent_offsets[s + 1] - begin;
    std::uint32_t pick = begin + static_cast<std::uint32_t>(rng.uniform_below(n));
    reversed.emplace_back(space.parent_ids[pick], space.parent_child_slot[pick]);
    s = space.parent_ids[pick];
  }

  Trajectory traj;
  for (auto it = reversed.rbegin(); it != reversed.rend(); ++it) {
    traj.steps.emplace_back(it->first, it->second);
  }
  traj.steps.emplace_back(x, Trajectory::kStopAction);
  traj.terminal = x;
  traj.complete = true;
  return traj;
}

const char* offline_kind_name(OfflineKind k) {
  switch (k) {
    case OfflineKind::uniform: return "uniform";
    case OfflineKind::reward: return "reward";
    case OfflineKind::proxy_on_policy: return "proxy_on_policy";
    case OfflineKind::abs_error: return "abs_error";
    case OfflineKind::sq_log_error: return "sq_log_error";
  }
  return "?";
}

OfflineKind offline_kind_from_name(const std::string& name) {
  if (name == "uniform") return OfflineKind::uniform;
  if (name == "reward") return OfflineKind::reward;
  if (name == "proxy_on_policy") return OfflineKind::proxy_on_policy;
  if (name == "abs_error") return OfflineKind::abs_error;
  if (name == "sq_log_error") return OfflineKind::sq_log_error;
  throw std::invalid_argument("unknown offline distribution: " + name);
}

OfflineDistribution::OfflineDistribution(OfflineKind kind, std::vector<StateId> support)
    : kind_(kind), support_(std::move(support)) {
  if (support_.empty()) throw std::invalid_argument("offline distribution needs support");
  weights_.assign(support_.size(), 1.0 / double(support_.size()));
}

void OfflineDistribution::refresh(const StateSpace& space, const RewardTable& rewards,
                                  const DistributionTable* model_logp,
                                  const DistributionTable& true_logp) {
  if (model_logp == nullptr && kind_ != OfflineKind::uniform && kind_ != OfflineKind::reward) {
    throw std::invalid_argument("proxy-dependent offline distribution needs a model distribution");
  }
  const std::size_t n = support_.size();
  std::vector<double> raw(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t t = space.terminal_index[support_[i]];
    switch (kind_) {
      case OfflineKind::uniform:
        raw[i] = 1.0;
        break;
      case OfflineKind::reward:
        raw[i] = std::exp(rewards.log_r[t]);
        break;
      case OfflineKind::proxy_on_policy:
        raw[i] = std::exp(model_logp->log_p[t]);
        break;
      case OfflineKind::abs_error:
        raw[i] = std::abs(std::exp(model_logp->log_p[t]) - std::exp(true_logp.log_p[t]));
        break;
      case OfflineKind::sq_log_error: {
        double d = model_logp->log_p[t] - true_logp.log_p[t];
        raw[i] = d * d;
        break;
      }
    }
  }
  double total = 0.0;
  for (double w : raw) total += w;
  if (!(total > 1e-12) || !std::isfinite(total)) {
    used_fallback_ = true;
    std::fill(raw.begin(), raw.end(), 1.0);
    total = double(n);
  }
  weights_.resize(n);
  cumulative_.resize(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    weights_[i] = raw[i] / total;
    acc += weights_[i];
    cumulative_[i] = acc;
  }
}

StateId OfflineDistribution::sample(Rng& rng) const {
  if (cumulative_.empty()) {
    // Uniform until the first refresh.
    return support_[rng.uniform_below(support_.size())];
  }
  double u = rng.uniform();
  auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
  std::size_t idx = std::min<std::size_t>(std::distance(cumulative_.begin(), it),
                                          support_.size() - 1);
  return support_[idx];
}

}  // namespace flowbench
