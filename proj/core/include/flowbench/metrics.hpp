#pragma once

#include <span>
#include <vector>

#include "flowbench/oracle.hpp"
#include "flowbench/split.hpp"

namespace flowbench {

/// Jensen-Shannon divergence in nats, computed in log space against the
/// midpoint mixture. Symmetric, in [0, ln 2].
double js_divergence(const DistributionTable& p, const DistributionTable& q);

/// Mean absolute error between log-probabilities over the whole support.
double mae_log(const DistributionTable& p, const DistributionTable& q);

/// Same restricted to the given terminal slots.
double mae_log_subset(const DistributionTable& p, const DistributionTable& q,
                      std::span<const std::uint32_t> slots);

/// Spearman rank correlation with averaged tie ranks. Returns NaN when
/// either argument has zero rank variance (undefined).
double spearman(std::span<const double> a, std::span<const double> b);

struct RankMetrics {
  double test_spearman = 0.0;
  double topk_spearman = 0.0;
  double mean_rank_optimal = 0.0;
  double total_test_prob = 0.0;
  double topk_total_prob = 0.0;
  bool k_clamped = false;
};

/// Ranking quality of model probabilities on the test split. Top-k selects
/// the k test states of highest true log-reward (ties broken by ascending
/// state id); optimal objects are the test states attaining the maximal
/// reward; mean rank is their average 0-based position when the test set
/// is sorted by model log-probability descending (ties by ascending id).
RankMetrics rank_metrics(const StateSpace& space, const DistributionTable& model_logp,
                         const RewardTable& true_rewards, const SplitSpec& split, int k = 100);

}  // namespace flowbench
