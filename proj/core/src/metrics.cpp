#include "flowbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace flowbench {

namespace {

constexpr double kLn2 = 0.6931471805599453;

void check_support(const DistributionTable& p, const DistributionTable& q) {
  if (p.log_p.size() != q.log_p.size()) {
    throw std::invalid_argument("distribution support mismatch");
  }
}

}  // namespace

double js_divergence(const DistributionTable& p, const DistributionTable& q) {
  check_support(p, q);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.log_p.size(); ++i) {
    double lp = p.log_p[i];
    double lq = q.log_p[i];
    double lmid = logaddexp(lp, lq) - kLn2;
    if (lp != kNegInf) acc += 0.5 * std::exp(lp) * (lp - lmid);
    if (lq != kNegInf) acc += 0.5 * std::exp(lq) * (lq - lmid);
  }
  return acc;
}

double mae_log(const DistributionTable& p, const DistributionTable& q) {
  check_support(p, q);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.log_p.size(); ++i) {
    acc += std::abs(p.log_p[i] - q.log_p[i]);
  }
  return acc / double(p.log_p.size());
}

double mae_log_subset(const DistributionTable& p, const DistributionTable& q,
                      std::span<const std::uint32_t> slots) {
  check_support(p, q);
  if (slots.empty()) return 0.0;
  double acc = 0.0;
  for (std::uint32_t i : slots) acc += std::abs(p.log_p[i] - q.log_p[i]);
  return acc / double(slots.size());
}

namespace {

std::vector<double> average_ranks(std::span<const double> xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    double avg = 0.5 * double(i + j) + 1.0;  // 1-based averaged rank
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw std::invalid_argument("spearman needs two equal-length vectors of size >= 2");
  }
  auto ra = average_ranks(a);
  auto rb = average_ranks(b);
  const double n = double(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double da = ra[i] - ma, db = rb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return cov / std::sqrt(va * vb);
}

RankMetrics rank_metrics(const StateSpace& space, const DistributionTable& model_logp,
                         const RewardTable& true_rewards, const SplitSpec& split, int k) {
  if (split.test_states.empty()) throw std::invalid_argument("rank_metrics needs a test split");

  RankMetrics out;
  const auto& test = split.test_states;
  std::vector<double> model_vals(test.size()), reward_vals(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::uint32_t t = space.terminal_index[test[i]];
    model_vals[i] = model_logp.log_p[t];
    reward_vals[i] = true_rewards.log_r[t];
  }

  out.test_spearman = spearman(model_vals, reward_vals);
  for (double lp : model_vals) out.total_test_prob += std::exp(lp);

  if (k > static_cast<int>(test.size())) {
    k = static_cast<int>(test.size());
    out.k_clamped = true;
  }

  // Top-k test states by true log-reward, ties by ascending id.
  std::vector<std::size_t> by_reward(test.size());
  std::iota(by_reward.begin(), by_reward.end(), 0);
  std::sort(by_reward.begin(), by_reward.end(), [&](std::size_t a, std::size_t b) {
    if (reward_vals[a] != reward_vals[b]) return reward_vals[a] > reward_vals[b];
    return test[a] < test[b];
  });
  std::vector<double> topk_model, topk_reward;
  for (int i = 0; i < k; ++i) {
    topk_model.push_back(model_vals[by_reward[i]]);
    topk_reward.push_back(reward_vals[by_reward[i]]);
    out.topk_total_prob += std::exp(model_vals[by_reward[i]]);
  }
  out.topk_spearman = k >= 2 ? spearman(topk_model, topk_reward)
                             : std::numeric_limits<double>::quiet_NaN();

  // Mean 0-based rank of the maximal-reward test states when sorted by
  // model probability descending.
  double best = *std::max_element(reward_vals.begin(), reward_vals.end());
  std::vector<std::size_t> by_model(test.size());
  std::iota(by_model.begin(), by_model.end(), 0);
  std::sort(by_model.begin(), by_model.end(), [&](std::size_t a, std::size_t b) {
    if (model_vals[a] != model_vals[b]) return model_vals[a] > model_vals[b];
    return test[a] < test[b];
  });
  double rank_sum = 0.0;
  int optimal = 0;
  for (std::size_t pos = 0; pos < by_model.size(); ++pos) {
    if (reward_vals[by_model[pos]] == best) {
      rank_sum += double(pos);
      ++optimal;
    }
  }
  out.mean_rank_optimal = rank_sum / double(optimal);
  return out;
}

}  // namespace flowbench
