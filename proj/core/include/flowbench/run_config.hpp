#pragma once

#include <cstdint>
#include <string>

#include "flowbench/policy_model.hpp"
#include "flowbench/state_space.hpp"

namespace flowbench {

/// Full description of one training run. Serializes to a canonical JSON
/// echo; accepted on disk as JSON or flat TOML (extension-dispatched).
struct RunConfig {
  // Environment.
  std::string env = "graph";
  std::string task = "constant";
  int graph_max_nodes = 7;
  bool graph_allow_disconnected = false;
  bool graph_count_empty_root = false;
  int grid_size = 64;
  bool grid_boundary_stop = false;
  int seq_max_len = 15;

  // Regime.
  std::string regime = "online";    // online | offline | distill | memorize
  std::string objective = "subtb";  // subtb | tb | fm
  std::string distill_kind = "log_pf";
  std::string memorize_kind = "paired_R";
  std::string offline_kind = "uniform";
  double alpha = 0.0;
  double split_fraction = 0.0;  // 0 disables the split
  double skew_gamma = 0.0;
  double noise_sigma = 0.0;
  bool shuffle_reward = false;

  // Budgets.
  std::int64_t steps = 20000;
  int batch = 64;
  double lr = 1e-3;
  std::int64_t eval_interval = 500;
  std::uint64_t seed = 1;

  // Behaviour flags.
  bool subtb_mean = true;
  bool pb_multiplicity_weighted = false;
  bool deterministic = true;

  ModelConfig model;

  std::string run_name;

  EnvConfig env_config() const;
  std::string canonical_name() const;

  std::string to_json() const;
  static RunConfig from_json_text(const std::string& text);
  static RunConfig from_toml_text(const std::string& text);
  static RunConfig from_file(const std::string& path);

  void validate() const;
};

}  // namespace flowbench
