#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flowbench/losses.hpp"
#include "flowbench/metrics.hpp"
#include "flowbench/run_config.hpp"
#include "flowbench/samplers.hpp"
#include "flowbench/split.hpp"

namespace flowbench {

/// Space cache directory: $FLOWBENCH_CACHE when set, else ".flowbench-cache".
std::string space_cache_dir();

/// Loads the FBSS cache for this config or enumerates and caches it.
StateSpace load_or_build_space(const EnvConfig& cfg);

/// One full-space model evaluation: exact induced terminal distribution
/// plus the implicit reward log F(s;theta) + log P_F(stop|s;theta).
struct EvalArtifacts {
  DistributionTable model_logp;        // [T]
  std::vector<double> implicit_log_r;  // [T]
  std::vector<double> log_state_flow;  // [S]
};

EvalArtifacts evaluate_policy_full(const StateSpace& space, const PolicyModel& model,
                                   ParamStore& params, std::size_t batch_size = 256);

struct MetricRow {
  std::int64_t step = 0;
  std::string metric;
  std::string scope;  // all | train | test
  double value = 0.0;
};

/// Distribution and ranking metrics for one evaluation snapshot.
std::vector<MetricRow> metric_rows(const StateSpace& space, const DistributionTable& true_logp,
                                   const RewardTable& rewards, const SplitSpec* split,
                                   const EvalArtifacts& eval, std::int64_t step);

std::string metrics_to_csv(const RunConfig& cfg, const std::vector<MetricRow>& rows);

struct RunResult {
  std::string run_dir;
  std::int64_t steps_done = 0;
  std::map<std::string, double> final_metrics;  // "metric/scope"

  double metric(const std::string& name, const std::string& scope) const {
    auto it = final_metrics.find(name + "/" + scope);
    if (it == final_metrics.end()) throw FlowbenchError("missing metric " + name + "/" + scope);
    return it->second;
  }
};

/// Runs one configured training run end to end: resolves the state space,
/// builds the reward table and oracle references, trains under the
/// configured regime, evaluates on the schedule, and writes manifest,
/// config echo, metrics.csv, split.json (when split), and the final
/// checkpoint into out_dir/<run name>/.
RunResult run_training(const RunConfig& cfg, const std::string& out_dir);

/// Recomputes the final-step metric rows from a run directory's checkpoint
/// and returns them alongside the rows recorded in metrics.csv.
struct EvalCheck {
  std::vector<MetricRow> recomputed;
  std::vector<MetricRow> recorded;
  double max_abs_diff = 0.0;
};
EvalCheck eval_checkpoint(const std::string& run_dir);

/// Builds the reward table for a run (task + transforms), seeded from the
/// run seed.
RewardTable run_reward_table(const RunConfig& cfg, const StateSpace& space);

}  // namespace flowbench
