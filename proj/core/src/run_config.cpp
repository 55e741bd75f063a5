#include "flowbench/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace flowbench {

EnvConfig RunConfig::env_config() const {
  EnvConfig cfg;
  if (env == "graph") cfg.kind = EnvKind::graph;
  else if (env == "grid") cfg.kind = EnvKind::grid;
  else if (env == "sequence") cfg.kind = EnvKind::sequence;
  else throw std::invalid_argument("unknown env: " + env);
  cfg.graph.max_nodes = graph_max_nodes;
  cfg.graph.allow_disconnected = graph_allow_disconnected;
  cfg.graph.count_empty_root = graph_count_empty_root;
  cfg.grid.size = grid_size;
  cfg.grid.boundary_forced_stop = grid_boundary_stop;
  cfg.sequence.max_len = seq_max_len;
  return cfg;
}

std::string RunConfig::canonical_name() const {
  if (!run_name.empty()) return run_name;
  std::ostringstream os;
  os << env << "_" << task << "_" << regime;
  if (regime == "online" || regime == "offline") os << "_" << objective;
  if (regime == "distill") os << "_" << distill_kind;
  if (regime == "memorize") os << "_" << memorize_kind;
  if (regime == "offline") os << "_" << offline_kind;
  os << "_seed" << seed;
  return os.str();
}

void RunConfig::validate() const {
  static const std::set<std::string> regimes{"online", "offline", "distill", "memorize"};
  static const std::set<std::string> objectives{"subtb", "tb", "fm"};
  if (!regimes.count(regime)) throw std::invalid_argument("unknown regime: " + regime);
  if (!objectives.count(objective)) throw std::invalid_argument("unknown objective: " + objective);
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("alpha must be in [0, 1]");
  if (split_fraction < 0.0 || split_fraction >= 1.0) {
    throw std::invalid_argument("split_fraction must be in [0, 1)");
  }
  if (steps < 1) throw std::invalid_argument("steps must be positive");
  if (batch < 1) throw std::invalid_argument("batch must be positive");
  if (eval_interval < 1) throw std::invalid_argument("eval_interval must be positive");
  if (skew_gamma < 0.0) throw std::invalid_argument("skew_gamma must be non-negative");
  if (noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be non-negative");
  env_config();  // validates env fields
}

std::string RunConfig::to_json() const {
  nlohmann::json j;
  j["env"] = env;
  j["task"] = task;
  j["graph_max_nodes"] = graph_max_nodes;
  j["graph_allow_disconnected"] = graph_allow_disconnected;
  j["graph_count_empty_root"] = graph_count_empty_root;
  j["grid_size"] = grid_size;
  j["grid_boundary_stop"] = grid_boundary_stop;
  j["seq_max_len"] = seq_max_len;
  j["regime"] = regime;
  j["objective"] = objective;
  j["distill_kind"] = distill_kind;
  j["memorize_kind"] = memorize_kind;
  j["offline_kind"] = offline_kind;
  j["alpha"] = alpha;
  j["split_fraction"] = split_fraction;
  j["skew_gamma"] = skew_gamma;
  j["noise_sigma"] = noise_sigma;
  j["shuffle_reward"] = shuffle_reward;
  j["steps"] = steps;
  j["batch"] = batch;
  j["lr"] = lr;
  j["eval_interval"] = eval_interval;
  j["seed"] = seed;
  j["subtb_mean"] = subtb_mean;
  j["pb_multiplicity_weighted"] = pb_multiplicity_weighted;
  j["deterministic"] = deterministic;
  j["run_name"] = run_name;
  j["model"] = {{"layers", model.layers},
                {"hidden", model.hidden},
                {"embedding", model.embedding},
                {"rounds", model.rounds},
                {"leaky_slope", model.leaky_slope}};
  return j.dump(2);
}

namespace {

void apply_json(RunConfig& cfg, const nlohmann::json& j) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("env", cfg.env);
  get("task", cfg.task);
  get("graph_max_nodes", cfg.graph_max_nodes);
  get("graph_allow_disconnected", cfg.graph_allow_disconnected);
  get("graph_count_empty_root", cfg.graph_count_empty_root);
  get("grid_size", cfg.grid_size);
  get("grid_boundary_stop", cfg.grid_boundary_stop);
  get("seq_max_len", cfg.seq_max_len);
  get("regime", cfg.regime);
  get("objective", cfg.objective);
  get("distill_kind", cfg.distill_kind);
  get("memorize_kind", cfg.memorize_kind);
  get("offline_kind", cfg.offline_kind);
  get("alpha", cfg.alpha);
  get("split_fraction", cfg.split_fraction);
  get("skew_gamma", cfg.skew_gamma);
  get("noise_sigma", cfg.noise_sigma);
  get("shuffle_reward", cfg.shuffle_reward);
  get("steps", cfg.steps);
  get("batch", cfg.batch);
  get("lr", cfg.lr);
  get("eval_interval", cfg.eval_interval);
  get("seed", cfg.seed);
  get("subtb_mean", cfg.subtb_mean);
  get("pb_multiplicity_weighted", cfg.pb_multiplicity_weighted);
  get("deterministic", cfg.deterministic);
  get("run_name", cfg.run_name);
  if (j.contains("model")) {
    const auto& m = j.at("model");
    if (m.contains("layers")) cfg.model.layers = m.at("layers").get<int>();
    if (m.contains("hidden")) cfg.model.hidden = m.at("hidden").get<int>();
    if (m.contains("embedding")) cfg.model.embedding = m.at("embedding").get<int>();
    if (m.contains("rounds")) cfg.model.rounds = m.at("rounds").get<int>();
    if (m.contains("leaky_slope")) cfg.model.leaky_slope = m.at("leaky_slope").get<double>();
  }
}

std::string strip(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  RunConfig cfg;
  apply_json(cfg, nlohmann::json::parse(text));
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::from_toml_text(const std::string& text) {
  // Flat TOML subset: [section] headers, key = value with strings,
  // booleans, and numbers. Sections prefix keys ("model.hidden").
  nlohmann::json j = nlohmann::json::object();
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw std::invalid_argument("toml: bad section at line " + std::to_string(lineno));
      section = strip(line.substr(1, line.size() - 2));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("toml: missing '=' at line " + std::to_string(lineno));
    std::string key = strip(line.substr(0, eq));
    std::string value = strip(line.substr(eq + 1));
    nlohmann::json parsed;
    if (!value.empty() && (value.front() == '"' || value.front() == '\'')) {
      if (value.size() < 2 || value.back() != value.front()) {
        throw std::invalid_argument("toml: unterminated string at line " + std::to_string(lineno));
      }
      parsed = value.substr(1, value.size() - 2);
    } else if (value == "true" || value == "false") {
      parsed = value == "true";
    } else {
      try {
        if (value.find_first_of(".eE") != std::string::npos) parsed = std::stod(value);
        else parsed = static_cast<std::int64_t>(std::stoll(value));
      } catch (const std::exception&) {
        throw std::invalid_argument("toml: bad value at line " + std::to_string(lineno));
      }
    }
    if (section.empty()) j[key] = parsed;
    else j[section][key] = parsed;
  }
  RunConfig cfg;
  apply_json(cfg, j);
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FlowbenchError("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".toml") {
    return from_toml_text(ss.str());
  }
  return from_json_text(ss.str());
}

}  // namespace flowbench
