#include "flowbench/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "flowbench/binio.hpp"
#include "flowbench/memorization.hpp"
#include "json.hpp"

namespace flowbench {

namespace fs = std::filesystem;

std::string space_cache_dir() {
  if (const char* env = std::getenv("FLOWBENCH_CACHE")) return env;
  return ".flowbench-cache";
}

StateSpace load_or_build_space(const EnvConfig& cfg) {
  fs::path dir = space_cache_dir();
  char hash[32];
  std::string desc = cfg.describe();
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fingerprint(
                    {reinterpret_cast<const std::uint8_t*>(desc.data()), desc.size()})));
  fs::path file = dir / ("space-" + std::string(hash) + ".fbss");
  if (fs::exists(file)) {
    auto space = deserialize_space(read_file_bytes(file.string()));
    if (space.config.describe() == desc) return space;
  }
  StateSpace space = enumerate_space(cfg);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!ec) write_file_bytes(file.string(), serialize_space(space));
  return space;
}

EvalArtifacts evaluate_policy_full(const StateSpace& space, const PolicyModel& model,
                                   ParamStore& params, std::size_t batch_size) {
  const std::size_t S = space.size();
  std::vector<StateId> all(S);
  for (std::size_t s = 0; s < S; ++s) all[s] = static_cast<StateId>(s);

  ModelPolicyEvaluator eval(model, params, batch_size);
  std::vector<double> flows;
  auto rows = eval.evaluate_with_flow(space, all, flows);

  // Feed the cached rows through the exact DP.
  class CachedEvaluator final : public PolicyEvaluator {
   public:
    explicit CachedEvaluator(std::vector<Row>& rows) : rows_(&rows) {}
    std::vector<Row> evaluate(const StateSpace&, std::span<const StateId> states) override {
      std::vector<Row> out(states.size());
      for (std::size_t i = 0; i < states.size(); ++i) out[i] = (*rows_)[states[i]];
      return out;
    }

   private:
    std::vector<Row>* rows_;
  };

  CachedEvaluator cached(rows);
  EvalArtifacts art;
  art.model_logp = exact_terminal_logprobs(space, cached);
  art.log_state_flow = flows;
  art.implicit_log_r.resize(space.num_terminals());
  for (std::size_t t = 0; t < space.num_terminals(); ++t) {
    StateId s = space.terminals[t];
    art.implicit_log_r[t] = flows[s] + rows[s].stop_logp;
  }
  return art;
}

std::vector<MetricRow> metric_rows(const StateSpace& space, const DistributionTable& true_logp,
                                   const RewardTable& rewards, const SplitSpec* split,
                                   const EvalArtifacts& eval, std::int64_t step) {
  std::vector<MetricRow> rows;
  rows.push_back({step, "js", "all", js_divergence(true_logp, eval.model_logp)});
  rows.push_back({step, "mae_logp", "all", mae_log(true_logp, eval.model_logp)});

  double reward_mae_all = 0.0;
  for (std::size_t t = 0; t < space.num_terminals(); ++t) {
    reward_mae_all += std::abs(eval.implicit_log_r[t] - rewards.log_r[t]);
  }
  rows.push_back({step, "reward_mae", "all", reward_mae_all / double(space.num_terminals())});

  if (split && !split->test_states.empty()) {
    std::vector<std::uint32_t> test_slots;
    test_slots.reserve(split->test_states.size());
    for (StateId s : split->test_states) test_slots.push_back(space.terminal_index[s]);

    rows.push_back({step, "mae_logp", "test",
                    mae_log_subset(true_logp, eval.model_logp, test_slots)});
    double rm = 0.0;
    for (std::uint32_t t : test_slots) rm += std::abs(eval.implicit_log_r[t] - rewards.log_r[t]);
    rows.push_back({step, "reward_mae", "test", rm / double(test_slots.size())});

    RankMetrics rank = rank_metrics(space, eval.model_logp, rewards, *split);
    rows.push_back({step, "spearman", "test", rank.test_spearman});
    rows.push_back({step, "topk_spearman", "test", rank.topk_spearman});
    rows.push_back({step, "mean_rank_optimal", "test", rank.mean_rank_optimal});
    rows.push_back({step, "total_prob", "test", rank.total_test_prob});
    rows.push_back({step, "topk_total_prob", "test", rank.topk_total_prob});
  }
  return rows;
}

std::string metrics_to_csv(const RunConfig& cfg, const std::vector<MetricRow>& rows) {
  std::string out = "step,seed,env,task,regime,metric,scope,value\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.value);
    out += std::to_string(r.step) + "," + std::to_string(cfg.seed) + "," + cfg.env + "," +
           cfg.task + "," + cfg.regime + "," + r.metric + "," + r.scope + "," + buf + "\n";
  }
  return out;
}

RewardTable run_reward_table(const RunConfig& cfg, const StateSpace& space) {
  RewardTable rewards = build_reward_table(space, cfg.task, derive_seed(cfg.seed, "reward"));
  if (cfg.skew_gamma > 0.0) rewards = skew_rewards(rewards, cfg.skew_gamma);
  if (cfg.shuffle_reward) rewards = shuffle_rewards(rewards, derive_seed(cfg.seed, "shuffle"));
  if (cfg.noise_sigma > 0.0) {
    rewards = corrupt_rewards(rewards, cfg.noise_sigma, derive_seed(cfg.seed, "noise"));
  }
  return rewards;
}

namespace {

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FlowbenchError("cannot write " + path.string());
  out << text;
}

std::string iso_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_manifest(const fs::path& run_dir, const RunConfig& cfg, const StateSpace& space,
                    const RewardTable& rewards) {
  nlohmann::json j;
  j["artifact_version"] = "1.0.0";
  j["config"] = nlohmann::json::parse(cfg.to_json());
  auto bytes = serialize_space(space);
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fingerprint(bytes)));
  j["space_fingerprint"] = hash;
  j["reported_states"] = space.reported_state_count();
  j["seed"] = cfg.seed;
  j["created"] = iso_timestamp();
  j["deviations"] = {
      "compact message-passing policy network in place of a large graph transformer",
      "position-wise MLP in place of a sequence transformer",
      "policy interpolation mixes with the exact uniform-terminal policy",
  };
  if (rewards.modes) {
    std::vector<std::string> modes;
    for (const auto& m : rewards.modes->modes) modes.push_back(bitstring_to_text(m));
    j["modes"] = modes;
    j["modes_seed"] = rewards.modes->seed;
  }
  write_text_file(run_dir / "manifest.json", j.dump(2));
}

struct TrainerState {
  const RunConfig* cfg;
  const StateSpace* space;
  const RewardTable* rewards;
  const FlowTable* true_ft;
  const DistributionTable* true_p;
  const SplitSpec* split;
  PolicyModel* model;
  ParamStore* params;
  const FlowTable* p_uniform;          // exact P_U (online mixture)
  OfflineDistribution* offline;        // offline regime
  const RegressionTargets* targets;    // distill/memorize
  const std::vector<StateId>* train_states;  // distill/memorize pool
};

enum class Objective { subtb, tb, fm };

Objective objective_from_name(const std::string& name) {
  if (name == "subtb") return Objective::subtb;
  if (name == "tb") return Objective::tb;
  if (name == "fm") return Objective::fm;
  throw std::invalid_argument("unknown objective: " + name);
}

// Forward pass over the union of states a trajectory batch touches
// (including parents for the flow-matching inflow terms), then one loss
// node per trajectory, averaged.
double trajectory_step(TrainerState& ts, Objective obj, const std::vector<Trajectory>& trajs,
                       GradMap& grads) {
  const StateSpace& space = *ts.space;
  std::set<StateId> state_set;
  for (const auto& traj : trajs) {
    for (const auto& [s, a] : traj.steps) {
      (void)a;
      state_set.insert(s);
      if (obj == Objective::fm && s != space.root) {
        for (StateId p : space.parents_of(s)) state_set.insert(p);
      }
    }
  }
  std::vector<StateId> batch_states(state_set.begin(), state_set.end());
  std::unordered_map<StateId, int> batch_pos;
  for (std::size_t i = 0; i < batch_states.size(); ++i) batch_pos[batch_states[i]] = int(i);

  Tape tape;
  BoundParams bp{&tape, ts.params, {}};
  PolicyBatch pb = ts.model->forward(tape, bp, space, batch_states);

  LossContext ctx;
  ctx.tape = &tape;
  ctx.space = &space;
  ctx.rewards = ts.rewards;
  ctx.batch = &pb;
  ctx.batch_pos = &batch_pos;
  ctx.subtb_mean = ts.cfg->subtb_mean;
  ctx.pb_multiplicity_weighted = ts.cfg->pb_multiplicity_weighted;
  if (obj == Objective::tb) ctx.log_z = bp.bind("log_z");

  std::vector<NodeId> losses;
  losses.reserve(trajs.size());
  for (const auto& traj : trajs) {
    switch (obj) {
      case Objective::subtb: losses.push_back(subtb_loss(ctx, traj)); break;
      case Objective::tb: losses.push_back(tb_loss(ctx, traj)); break;
      case Objective::fm: losses.push_back(fm_loss(ctx, traj)); break;
    }
  }

  std::vector<std::pair<std::int32_t, std::int32_t>> pick;
  for (std::size_t i = 0; i < losses.size(); ++i) pick.emplace_back(std::int32_t(i), 0);
  NodeId stacked = tape.gather_flat(losses, std::move(pick));
  Tensor weights(1, int(losses.size()));
  for (auto& w : weights.v) w = 1.0 / double(losses.size());
  NodeId total = tape.matmul(tape.constant(std::move(weights)), stacked);

  double loss = tape.value(total).v[0];
  if (!std::isfinite(loss)) {
    NodeId bad = tape.first_non_finite();
    throw FlowbenchError("non-finite loss (first bad op: " +
                         std::string(bad >= 0 ? tape.op_name(bad) : "loss") + ")");
  }
  tape.backward(total);
  grads = bp.grads();
  return loss;
}

double distill_step(TrainerState& ts, std::span<const StateId> batch_states, GradMap& grads) {
  const StateSpace& space = *ts.space;
  std::unordered_map<StateId, int> batch_pos;
  for (std::size_t i = 0; i < batch_states.size(); ++i) batch_pos[batch_states[i]] = int(i);

  Tape tape;
  BoundParams bp{&tape, ts.params, {}};
  PolicyBatch pb = ts.model->forward(tape, bp, space, batch_states);

  LossContext ctx;
  ctx.tape = &tape;
  ctx.space = &space;
  ctx.rewards = ts.rewards;
  ctx.batch = &pb;
  ctx.batch_pos = &batch_pos;

  NodeId loss_node = distill_loss(ctx, batch_states, *ts.targets);
  double loss = tape.value(loss_node).v[0];
  if (!std::isfinite(loss)) {
    NodeId bad = tape.first_non_finite();
    throw FlowbenchError("non-finite loss (first bad op: " +
                         std::string(bad >= 0 ? tape.op_name(bad) : "loss") + ")");
  }
  tape.backward(loss_node);
  grads = bp.grads();
  return loss;
}

}  // namespace

RunResult run_training(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();

  fs::path run_dir = fs::path(out_dir) / cfg.canonical_name();
  fs::create_directories(run_dir);

  StateSpace space = load_or_build_space(cfg.env_config());
  RewardTable rewards = run_reward_table(cfg, space);
  FlowTable true_ft = true_flows(space, rewards, cfg.pb_multiplicity_weighted);
  DistributionTable true_p = true_terminal_logprobs(rewards);

  std::optional<SplitSpec> split;
  if (cfg.split_fraction > 0.0) {
    split = make_test_split(space, cfg.split_fraction, derive_seed(cfg.seed, "split"));
    write_text_file(run_dir / "split.json", split_to_json(space, *split));
  }

  ModelConfig mc = cfg.model;
  mc.seed = derive_seed(cfg.seed, "model");
  PolicyModel model(cfg.env_config(), mc);
  ParamStore params;
  model.init_params(params);

  write_text_file(run_dir / "config.json", cfg.to_json());
  write_manifest(run_dir, cfg, space, rewards);

  // Regime-specific setup.
  std::optional<FlowTable> p_uniform;
  if (cfg.regime == "online" && cfg.alpha > 0.0) {
    if (cfg.task == "constant") {
      p_uniform = true_ft;  // constant reward: the true policy already is P_U
    } else {
      p_uniform = uniform_terminal_policy(space);
    }
  }

  std::optional<OfflineDistribution> offline;
  if (cfg.regime == "offline") {
    std::vector<StateId> support =
        split ? split->train_terminals
              : std::vector<StateId>(space.terminals.begin(), space.terminals.end());
    offline.emplace(offline_kind_from_name(cfg.offline_kind), std::move(support));
  }

  std::optional<RegressionTargets> targets;
  std::vector<StateId> train_states;
  if (cfg.regime == "distill" || cfg.regime == "memorize") {
    DistillKind kind;
    if (cfg.regime == "distill") {
      kind = distill_kind_from_name(cfg.distill_kind);
      if (kind == DistillKind::log_reward) {
        targets = targets_log_reward(space, rewards);
      } else {
        targets = targets_from_flows(space, true_ft, kind);
      }
    } else {
      MemorizeKind mk = memorize_kind_from_name(cfg.memorize_kind);
      targets = memorization_targets(space, rewards, mk, derive_seed(cfg.seed, "memorize"));
      kind = targets->kind;
    }
    // Training pool: scalar regression needs terminable states; policy
    // regression covers every state with actions or stop. Split test
    // states are excluded.
    for (std::size_t s = 0; s < space.size(); ++s) {
      if (split && split->in_test[s]) continue;
      if (kind == DistillKind::log_reward) {
        if (space.terminable[s]) train_states.push_back(static_cast<StateId>(s));
      } else {
        train_states.push_back(static_cast<StateId>(s));
      }
    }
  }

  TrainerState ts{&cfg,   &space,  &rewards, &true_ft,
                  &true_p, split ? &*split : nullptr,
                  &model, &params, p_uniform ? &*p_uniform : nullptr,
                  offline ? &*offline : nullptr, targets ? &*targets : nullptr, &train_states};

  Objective obj = objective_from_name(cfg.objective);
  ModelPolicyEvaluator sampler_eval(model, params, 512);

  std::vector<MetricRow> all_rows;
  double loss_acc = 0.0;
  std::int64_t loss_count = 0;

  auto run_eval = [&](std::int64_t step) {
    EvalArtifacts art = evaluate_policy_full(space, model, params);
    if (loss_count > 0) {
      all_rows.push_back({step, "loss", "train", loss_acc / double(loss_count)});
      loss_acc = 0.0;
      loss_count = 0;
    }
    auto rows = metric_rows(space, true_p, rewards, split ? &*split : nullptr, art, step);
    all_rows.insert(all_rows.end(), rows.begin(), rows.end());
    if (obj == Objective::tb && (cfg.regime == "online" || cfg.regime == "offline")) {
      all_rows.push_back({step, "log_z", "all", params.get("log_z").v[0]});
    }
    if (offline) {
      offline->refresh(space, rewards, &art.model_logp, true_p);
      if (offline->used_fallback()) {
        std::fprintf(stderr, "[flowbench] offline weights degenerate at step %lld, uniform fallback\n",
                     static_cast<long long>(step));
      }
    }
  };

  run_eval(0);

  ParamStore::Adam adam;
  adam.lr = cfg.lr;

  for (std::int64_t step = 1; step <= cfg.steps; ++step) {
    GradMap grads;
    double loss = 0.0;
    try {
      if (cfg.regime == "online") {
        auto trajs = sample_forward_trajectories(space, sampler_eval, ts.p_uniform,
                                                 {cfg.alpha}, cfg.seed,
                                                 std::uint64_t(step - 1) * cfg.batch, cfg.batch);
        loss = trajectory_step(ts, obj, trajs, grads);
      } else if (cfg.regime == "offline") {
        std::vector<Trajectory> trajs;
        trajs.reserve(cfg.batch);
        for (int b = 0; b < cfg.batch; ++b) {
          Rng rng(derive_seed(cfg.seed, "offline-traj",
                              std::uint64_t(step - 1) * cfg.batch + std::uint64_t(b)));
          StateId x = offline->sample(rng);
          trajs.push_back(sample_backward_trajectory(space, x, rng));
        }
        loss = trajectory_step(ts, obj, trajs, grads);
      } else {
        Rng rng(derive_seed(cfg.seed, "minibatch", std::uint64_t(step - 1)));
        std::size_t want = std::min<std::size_t>(cfg.batch, train_states.size());
        std::vector<StateId> batch_states;
        batch_states.reserve(want);
        for (std::uint64_t idx : rng.sample_without_replacement(train_states.size(), want)) {
          batch_states.push_back(train_states[idx]);
        }
        std::sort(batch_states.begin(), batch_states.end());
        loss = distill_step(ts, batch_states, grads);
      }
    } catch (const FlowbenchError& err) {
      write_text_file(run_dir / "abort_dump.txt",
                      std::string(err.what()) + "\nstep " + std::to_string(step) + "\n");
      throw;
    }

    params.adam_step(grads, adam);
    loss_acc += loss;
    loss_count += 1;

    if (step % cfg.eval_interval == 0 || step == cfg.steps) run_eval(step);
  }

  write_text_file(run_dir / "metrics.csv", metrics_to_csv(cfg, all_rows));
  write_file_bytes((run_dir / "final.fbck").string(), params.serialize(cfg.to_json()));

  RunResult result;
  result.run_dir = run_dir.string();
  result.steps_done = cfg.steps;
  std::int64_t last_step = all_rows.empty() ? 0 : all_rows.back().step;
  for (const auto& row : all_rows) {
    if (row.step == last_step) result.final_metrics[row.metric + "/" + row.scope] = row.value;
  }
  return result;
}

EvalCheck eval_checkpoint(const std::string& run_dir_str) {
  fs::path run_dir(run_dir_str);

  std::ifstream cfg_in(run_dir / "config.json");
  if (!cfg_in) throw FlowbenchError("missing config.json in " + run_dir_str);
  std::stringstream cfg_ss;
  cfg_ss << cfg_in.rdbuf();
  RunConfig cfg = RunConfig::from_json_text(cfg_ss.str());

  std::string echo;
  ParamStore params =
      ParamStore::deserialize(read_file_bytes((run_dir / "final.fbck").string()), &echo);

  StateSpace space = load_or_build_space(cfg.env_config());
  RewardTable rewards = run_reward_table(cfg, space);
  DistributionTable true_p = true_terminal_logprobs(rewards);

  std::optional<SplitSpec> split;
  if (cfg.split_fraction > 0.0) {
    std::ifstream split_in(run_dir / "split.json");
    if (split_in) {
      std::stringstream ss;
      ss << split_in.rdbuf();
      split = split_from_json(space, ss.str());
    } else {
      split = make_test_split(space, cfg.split_fraction, derive_seed(cfg.seed, "split"));
    }
  }

  ModelConfig mc = cfg.model;
  mc.seed = derive_seed(cfg.seed, "model");
  PolicyModel model(cfg.env_config(), mc);

  EvalArtifacts art = evaluate_policy_full(space, model, params);

  EvalCheck check;
  check.recomputed = metric_rows(space, true_p, rewards, split ? &*split : nullptr, art,
                                 params.step_count());

  // Compare against the recorded final rows.
  std::ifstream metrics_in(run_dir / "metrics.csv");
  if (metrics_in) {
    std::string line;
    std::getline(metrics_in, line);  // header
    std::vector<MetricRow> recorded;
    while (std::getline(metrics_in, line)) {
      std::vector<std::string> fields;
      std::stringstream ls(line);
      std::string field;
      while (std::getline(ls, field, ',')) fields.push_back(field);
      if (fields.size() != 8) continue;
      MetricRow row;
      row.step = std::stoll(fields[0]);
      row.metric = fields[5];
      row.scope = fields[6];
      row.value = std::stod(fields[7]);
      recorded.push_back(row);
    }
    std::int64_t last = recorded.empty() ? 0 : recorded.back().step;
    for (const auto& row : recorded) {
      if (row.step == last) check.recorded.push_back(row);
    }
    for (const auto& rec : check.recorded) {
      for (const auto& now : check.recomputed) {
        if (rec.metric == now.metric && rec.scope == now.scope) {
          double diff = std::abs(rec.value - now.value);
          if (std::isnan(rec.value) && std::isnan(now.value)) diff = 0.0;
          check.max_abs_diff = std::max(check.max_abs_diff, diff);
        }
      }
    }
  }
  return check;
}

}  // namespace flowbench
