#include "flowbench/rewards.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

#include "flowbench/rng.hpp"

namespace flowbench {

namespace {

constexpr double kLogRewardFloor = -10.0;

void bron_kerbosch(const std::array<std::uint8_t, 8>& nbr, std::uint8_t r, std::uint8_t p,
                   std::uint8_t x, std::vector<std::uint8_t>& out) {
  if (p == 0 && x == 0) {
    out.push_back(r);
    return;
  }
  // Pivot: vertex of P|X with most neighbours in P.
  std::uint8_t px = p | x;
  int pivot = -1, best = -1;
  for (int v = 0; v < 8; ++v) {
    if ((px >> v) & 1) {
      int cnt = std::popcount(std::uint8_t(p & nbr[v]));
      if (cnt > best) {
        best = cnt;
        pivot = v;
      }
    }
  }
  std::uint8_t candidates = p & ~nbr[pivot];
  for (int v = 0; v < 8; ++v) {
    if (!((candidates >> v) & 1)) continue;
    std::uint8_t vbit = std::uint8_t(1u << v);
    bron_kerbosch(nbr, r | vbit, p & nbr[v], x & nbr[v], out);
    p &= ~vbit;
    x |= vbit;
  }
}

}  // namespace

std::vector<std::uint8_t> maximal_cliques(const ColoredGraph& g) {
  if (g.n == 0) return {};
  std::array<std::uint8_t, 8> nbr{};
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j < g.n; ++j) {
      if (i != j && has_edge(g, i, j)) nbr[i] |= std::uint8_t(1u << j);
    }
  }
  std::vector<std::uint8_t> out;
  bron_kerbosch(nbr, 0, std::uint8_t((1u << g.n) - 1), 0, out);
  return out;
}

double counting_log_reward(const ColoredGraph& g) {
  int red = 0, green = 0;
  for (int i = 0; i < g.n; ++i) (color_of(g, i) == 0 ? red : green)++;
  return -std::abs(red + green / 2.0 - 3.0) / 4.0 * 10.0;
}

double neighbors_log_reward(const ColoredGraph& g) {
  int correct = 0;
  for (int i = 0; i < g.n; ++i) {
    int opposite = 0;
    for (int j = 0; j < g.n; ++j) {
      if (j != i && has_edge(g, i, j) && color_of(g, j) != color_of(g, i)) ++opposite;
    }
    if (opposite % 2 == 0) ++correct;
  }
  double base = g.n > 3 ? double(correct - g.n) : -5.0;
  return base * 10.0 / 7.0;
}

double cliques_log_reward(const ColoredGraph& g) {
  auto cliques = maximal_cliques(g);
  double match_sum = 0.0;
  int membership = 0;
  for (std::uint8_t clique : cliques) {
    int size = std::popcount(clique);
    membership += size;
    if (size == 4) {
      int same = 0;
      for (int c = 0; c < 2; ++c) {
        int cnt = 0;
        for (int v = 0; v < g.n; ++v) {
          if (((clique >> v) & 1) && color_of(g, v) == c) ++cnt;
        }
        same = std::max(same, cnt);
      }
      match_sum += same >= 3 ? 1.0 : 0.5;
    }
  }
  double raw = match_sum - membership + g.n - 1;
  return std::max(raw, kLogRewardFloor);
}

namespace {

double branin_raw(double x1, double x2) {
  constexpr double a = 1.0;
  const double b = 5.1 / (4.0 * std::numbers::pi * std::numbers::pi);
  const double c = 5.0 / std::numbers::pi;
  constexpr double r = 6.0;
  constexpr double s = 10.0;
  const double t = 1.0 / (8.0 * std::numbers::pi);
  double term = x2 - b * x1 * x1 + c * x1 - r;
  return a * term * term + s * (1.0 - t) * std::cos(x1) + s;
}

double currin_raw(double x1, double x2) {
  double factor = x2 == 0.0 ? 1.0 : 1.0 - std::exp(-1.0 / (2.0 * x2));
  double num = 2300.0 * x1 * x1 * x1 + 1900.0 * x1 * x1 + 2092.0 * x1 + 60.0;
  double den = 100.0 * x1 * x1 * x1 + 500.0 * x1 * x1 + 4.0 * x1 + 20.0;
  return factor * num / den;
}

double grid_raw(const std::string& task, const GridCell& c, int M) {
  double fx = double(c.x) / double(M - 1);
  double fy = double(c.y) / double(M - 1);
  if (task == "branin") return branin_raw(-5.0 + 15.0 * fx, 15.0 * fy);
  if (task == "currin") return currin_raw(fx, fy);
  throw std::invalid_argument("unknown grid task: " + task);
}

}  // namespace

double grid_log_reward(const std::string& task, const GridCell& c, const GridConfig& cfg) {
  const int M = cfg.size;
  if (task == "constant") return 0.0;
  if (task == "corners") {
    double ux = std::abs(double(c.x) / double(M - 1) - 0.5);
    double uy = std::abs(double(c.y) / double(M - 1) - 0.5);
    auto in_mid = [](double u) { return u > 0.25 && u <= 0.5; };
    auto in_band = [](double u) { return u > 0.3 && u < 0.4; };
    double r = 0.01;
    if (in_mid(ux) && in_mid(uy)) r += 0.5;
    if (in_band(ux) && in_band(uy)) r += 2.0;
    return std::log(r);
  }
  if (task == "branin" || task == "currin") {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int x = 0; x < M; ++x) {
      for (int y = 0; y < M; ++y) {
        double f = grid_raw(task, {x, y}, M);
        lo = std::min(lo, f);
        hi = std::max(hi, f);
      }
    }
    double f = grid_raw(task, c, M);
    // branin is a minimization test function; currin a maximization one.
    double frac = task == "branin" ? (f - lo) / (hi - lo) : (hi - f) / (hi - lo);
    return kLogRewardFloor * frac;
  }
  throw std::invalid_argument("unknown grid task: " + task);
}

double seq_log_reward(const BitString& x, const ModeSet& modes, int max_len) {
  if (x.length < 1) throw std::invalid_argument("sequence reward requires a non-empty string");
  int best = std::numeric_limits<int>::max();
  for (const BitString& m : modes.modes) best = std::min(best, edit_distance(x, m));
  return -10.0 * double(best) / double(max_len);
}

double skew_transform(double log_r, double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("skew gamma must be non-negative");
  if (log_r > 0.0) throw std::invalid_argument("skew transform requires log-rewards <= 0");
  return log_r * std::exp(-gamma * log_r);
}

RewardTable build_reward_table(const StateSpace& space, const std::string& task,
                               std::uint64_t seed) {
  RewardTable table;
  table.task = task;
  table.seed = seed;
  table.log_r.resize(space.num_terminals());

  if (task == "constant") {
    table.provenance = RewardProvenance::constant;
    std::fill(table.log_r.begin(), table.log_r.end(), 0.0);
    return table;
  }

  switch (space.config.kind) {
    case EnvKind::graph: {
      double (*fn)(const ColoredGraph&) = nullptr;
      if (task == "counting") fn = counting_log_reward;
      else if (task == "neighbors") fn = neighbors_log_reward;
      else if (task == "cliques") fn = cliques_log_reward;
      else throw std::invalid_argument("unknown graph task: " + task);
      for (std::size_t i = 0; i < space.num_terminals(); ++i) {
        table.log_r[i] = fn(decode_graph(space.states[space.terminals[i]]));
      }
      break;
    }
    case EnvKind::grid: {
      // Compute min/max once rather than per cell.
      const int M = space.config.grid.size;
      if (task == "corners") {
        for (std::size_t i = 0; i < space.num_terminals(); ++i) {
          table.log_r[i] =
              grid_log_reward(task, decode_cell(space.states[space.terminals[i]]), space.config.grid);
        }
      } else if (task == "branin" || task == "currin") {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (int x = 0; x < M; ++x) {
          for (int y = 0; y < M; ++y) {
            double f = grid_raw(task, {x, y}, M);
            lo = std::min(lo, f);
            hi = std::max(hi, f);
          }
        }
        for (std::size_t i = 0; i < space.num_terminals(); ++i) {
          double f = grid_raw(task, decode_cell(space.states[space.terminals[i]]), M);
          double frac = task == "branin" ? (f - lo) / (hi - lo) : (hi - f) / (hi - lo);
          table.log_r[i] = kLogRewardFloor * frac;
        }
      } else {
        throw std::invalid_argument("unknown grid task: " + task);
      }
      break;
    }
    case EnvKind::sequence: {
      if (task != "edit_distance") throw std::invalid_argument("unknown sequence task: " + task);
      table.modes = sample_modes(space.config.sequence, seed);
      for (std::size_t i = 0; i < space.num_terminals(); ++i) {
        table.log_r[i] = seq_log_reward(decode_bitstring(space.states[space.terminals[i]]),
                                        *table.modes, space.config.sequence.max_len);
      }
      break;
    }
  }
  return table;
}

RewardTable skew_rewards(const RewardTable& t, double gamma) {
  RewardTable out = t;
  out.provenance = RewardProvenance::skewed;
  out.gamma = gamma;
  for (double& v : out.log_r) v = skew_transform(v, gamma);
  return out;
}

RewardTable shuffle_rewards(const RewardTable& t, std::uint64_t seed) {
  RewardTable out = t;
  out.provenance = RewardProvenance::shuffled;
  out.seed = seed;
  Rng rng(derive_seed(seed, "shuffle-rewards"));
  auto perm = rng.sample_without_replacement(t.log_r.size(), t.log_r.size());
  for (std::size_t i = 0; i < t.log_r.size(); ++i) out.log_r[i] = t.log_r[perm[i]];
  return out;
}

RewardTable corrupt_rewards(const RewardTable& t, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("noise sigma must be non-negative");
  RewardTable out = t;
  out.provenance = RewardProvenance::corrupted;
  out.sigma = sigma;
  out.seed = seed;
  Rng rng(derive_seed(seed, "corrupt-rewards"));
  const double floor = std::exp(kLogRewardFloor);
  for (double& v : out.log_r) {
    double corrupted = std::exp(v) + rng.normal(0.0, sigma);
    v = std::log(std::max(corrupted, floor));
  }
  return out;
}

std::vector<std::string> reward_tasks_for(EnvKind kind) {
  switch (kind) {
    case EnvKind::graph: return {"constant", "counting", "neighbors", "cliques"};
    case EnvKind::grid: return {"constant", "corners", "branin", "currin"};
    case EnvKind::sequence: return {"constant", "edit_distance"};
  }
  return {};
}

std::string reward_table_to_csv(const StateSpace& space, const RewardTable& t) {
  std::ostringstream os;
  os << "state,log_r\n";
  char buf[64];
  for (std::size_t i = 0; i < t.log_r.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", t.log_r[i]);
    os << space.terminals[i] << "," << buf << "\n";
  }
  return os.str();
}

}  // namespace flowbench
