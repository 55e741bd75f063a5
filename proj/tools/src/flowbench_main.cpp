// Command-line front end: enumerate/oracle/split/train/eval/report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "flowbench/binio.hpp"
#include "flowbench/report.hpp"
#include "flowbench/thread_pool.hpp"
#include "flowbench/training.hpp"

namespace fs = std::filesystem;
using namespace flowbench;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "runs";
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool deterministic = true;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Run config file (.json or .toml)");
  cmd->add_option("--out", opts.out_dir, "Output directory");
  cmd->add_option("--seed", opts.seed, "Root seed (overrides config)")
      ->each([&](const std::string&) { opts.seed_set = true; });
  cmd->add_flag("--deterministic,!--no-deterministic", opts.deterministic,
                "Deterministic execution (default on)");
  cmd->add_option("--threads", opts.threads, "Worker thread count");
}

RunConfig load_config(const CommonOpts& opts) {
  RunConfig cfg;
  if (!opts.config_path.empty()) cfg = RunConfig::from_file(opts.config_path);
  if (opts.seed_set) cfg.seed = opts.seed;
  cfg.deterministic = opts.deterministic;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FlowbenchError("cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowbench: exact-evaluation benchmark engine for constructive samplers"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string env_name = "graph";
  std::string task_name;
  double fraction = 0.1;
  std::string run_dir;
  std::string glob_pattern;
  bool dump_json = false;

  auto* enumerate_cmd = app.add_subcommand("enumerate", "Build, validate, and cache a state space");
  add_common(enumerate_cmd, opts);
  enumerate_cmd->add_option("--env", env_name, "Environment: graph | grid | sequence");
  enumerate_cmd->add_flag("--json", dump_json, "Also dump a JSON listing (small spaces)");

  auto* oracle_cmd = app.add_subcommand("oracle", "Dump true flows and p(x) for a task");
  add_common(oracle_cmd, opts);
  oracle_cmd->add_option("--env", env_name, "Environment: graph | grid | sequence");
  oracle_cmd->add_option("--task", task_name, "Reward task name");

  auto* split_cmd = app.add_subcommand("split", "Build a structured train/test split");
  add_common(split_cmd, opts);
  split_cmd->add_option("--env", env_name, "Environment: graph | grid | sequence");
  split_cmd->add_option("--fraction", fraction, "Test fraction (default 0.1)");

  auto* train_cmd = app.add_subcommand("train", "Run a training regime from a config file");
  add_common(train_cmd, opts);

  auto* eval_cmd = app.add_subcommand("eval", "Recompute metrics from a run's final checkpoint");
  add_common(eval_cmd, opts);
  eval_cmd->add_option("--run", run_dir, "Run directory")->required();

  auto* report_cmd = app.add_subcommand("report", "Aggregate metrics across runs (mean +- sd)");
  add_common(report_cmd, opts);
  report_cmd->add_option("--glob", glob_pattern, "Run directory pattern, e.g. 'runs/online_*'")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    set_thread_count(opts.threads);

    if (*enumerate_cmd) {
      RunConfig cfg = load_config(opts);
      cfg.env = env_name;
      EnvConfig env = cfg.env_config();
      StateSpace space = load_or_build_space(env);
      auto report = validate_space(space);
      if (!report.ok) {
        std::cerr << "validation failed: " << report.message << "\n";
        return 1;
      }
      std::printf("states: %zu\n", space.reported_state_count());
      std::printf("edges: %zu\nterminals: %zu\n", space.num_edges(), space.num_terminals());
      if (dump_json) {
        fs::create_directories(opts.out_dir);
        fs::path path = fs::path(opts.out_dir) / (env_name + "_space.json");
        write_text(path, space_to_json(space));
        std::printf("json: %s\n", path.string().c_str());
      }
      return 0;
    }

    if (*oracle_cmd) {
      RunConfig cfg = load_config(opts);
      cfg.env = env_name;
      if (!task_name.empty()) cfg.task = task_name;
      StateSpace space = load_or_build_space(cfg.env_config());
      RewardTable rewards = run_reward_table(cfg, space);
      FlowTable flows = true_flows(space, rewards, cfg.pb_multiplicity_weighted);
      DistributionTable dist = true_terminal_logprobs(rewards);
      fs::create_directories(opts.out_dir);
      fs::path base = fs::path(opts.out_dir);
      write_text(base / (cfg.env + "_" + cfg.task + "_rewards.csv"),
                 reward_table_to_csv(space, rewards));
      write_text(base / (cfg.env + "_" + cfg.task + "_flows.csv"),
                 flow_table_to_csv(space, flows));
      write_text(base / (cfg.env + "_" + cfg.task + "_true_p.csv"),
                 distribution_to_csv(space, dist));
      std::printf("log_z: %.12f\n", dist.log_z);
      return 0;
    }

    if (*split_cmd) {
      RunConfig cfg = load_config(opts);
      cfg.env = env_name;
      StateSpace space = load_or_build_space(cfg.env_config());
      SplitSpec split = make_test_split(space, fraction, derive_seed(cfg.seed, "split"));
      fs::create_directories(opts.out_dir);
      fs::path path = fs::path(opts.out_dir) / (cfg.env + "_split.json");
      write_text(path, split_to_json(space, split));
      std::printf("test states: %zu\npicked roots: %zu\nfile: %s\n", split.test_states.size(),
                  split.picked_roots.size(), path.string().c_str());
      return 0;
    }

    if (*train_cmd) {
      if (opts.config_path.empty()) {
        std::cerr << "train requires --config\n";
        return 1;
      }
      RunConfig cfg = load_config(opts);
      RunResult result = run_training(cfg, opts.out_dir);
      std::printf("run: %s\n", result.run_dir.c_str());
      for (const auto& [key, value] : result.final_metrics) {
        std::printf("%s: %.6f\n", key.c_str(), value);
      }
      return 0;
    }

    if (*eval_cmd) {
      EvalCheck check = eval_checkpoint(run_dir);
      for (const auto& row : check.recomputed) {
        std::printf("%s/%s: %.12f\n", row.metric.c_str(), row.scope.c_str(), row.value);
      }
      std::printf("max |diff| vs metrics.csv: %.3e\n", check.max_abs_diff);
      return check.max_abs_diff <= 1e-9 ? 0 : 2;
    }

    if (*report_cmd) {
      auto rows = aggregate_runs(glob_pattern);
      std::string csv = report_to_csv(rows);
      std::fputs(csv.c_str(), stdout);
      fs::create_directories(opts.out_dir);
      write_text(fs::path(opts.out_dir) / "report.csv", csv);
      return 0;
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
