#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowbench/graph_env.hpp"
#include "flowbench/simple_envs.hpp"
#include "flowbench/state_space.hpp"

namespace flowbench {

enum class RewardProvenance : std::uint8_t {
  original = 0,
  skewed = 1,
  shuffled = 2,
  corrupted = 3,
  constant = 4,
};

/// Per-terminable-state log-rewards for a named task. R(s) = exp(log_r) is
/// strictly positive; graph and sequence tasks live in [-10, 0].
struct RewardTable {
  std::string task;
  std::vector<double> log_r;  // indexed by terminal slot (space.terminals)
  RewardProvenance provenance = RewardProvenance::original;
  double gamma = 0.0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::optional<ModeSet> modes;  // sequence edit-distance task only

  double log_reward_of(const StateSpace& space, StateId s) const {
    return log_r[space.terminal_index[s]];
  }
};

// Graph tasks (appendix reference semantics).
double counting_log_reward(const ColoredGraph& g);
double neighbors_log_reward(const ColoredGraph& g);
double cliques_log_reward(const ColoredGraph& g);

/// All maximal cliques as node bitmasks (Bron-Kerbosch with pivoting).
std::vector<std::uint8_t> maximal_cliques(const ColoredGraph& g);

// Grid tasks. corners uses the indicator-product form; branin and currin
// are the standard test functions on the rescaled cell, min-max normalized
// over the whole grid into log-rewards in [-10, 0].
double grid_log_reward(const std::string& task, const GridCell& c, const GridConfig& cfg);

double seq_log_reward(const BitString& x, const ModeSet& modes, int max_len);

/// H_gamma(y) = y * exp(-gamma * y); order-preserving for y <= 0,
/// gamma >= 0. Rejects positive log-rewards.
double skew_transform(double log_r, double gamma);

/// Builds the per-terminal table for a task name valid in the space's
/// environment. `seed` drives the mode draw of the sequence task.
RewardTable build_reward_table(const StateSpace& space, const std::string& task,
                               std::uint64_t seed);

RewardTable skew_rewards(const RewardTable& t, double gamma);

/// Uniformly random permutation of the log-reward values across
/// terminable states, deterministic per seed.
RewardTable shuffle_rewards(const RewardTable& t, std::uint64_t seed);

/// R~(x) = max(R(x) + eps, exp(-10)), eps ~ N(0, sigma) i.i.d. per
/// terminal. The floor keeps rewards positive where the additive noise
/// alone would not.
RewardTable corrupt_rewards(const RewardTable& t, double sigma, std::uint64_t seed);

std::vector<std::string> reward_tasks_for(EnvKind kind);

/// CSV dump (state index, log_r), one terminal per row.
std::string reward_table_to_csv(const StateSpace& space, const RewardTable& t);

}  // namespace flowbench
