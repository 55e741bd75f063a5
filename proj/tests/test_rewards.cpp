#include "doctest.h"
#include "flowbench/rewards.hpp"
#include "flowbench/rng.hpp"
#include "flowbench/state_space.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

using namespace flowbench;

namespace {

ColoredGraph from_edges(int n, std::uint8_t green_mask,
                        std::initializer_list<std::pair<int, int>> edges) {
  ColoredGraph g;
  g.n = static_cast<std::uint8_t>(n);
  g.colors = green_mask;
  for (auto [u, v] : edges) g = with_edge(g, u, v);
  return g;
}

// Reference oracle for the clique task: enumerate maximal cliques by
// checking all vertex subsets directly, then apply the scoring rule.
double cliques_reference(const ColoredGraph& g) {
  double match_sum = 0.0;
  int membership = 0;
  for (std::uint32_t sub = 1; sub < (1u << g.n); ++sub) {
    bool clique = true;
    for (int i = 0; i < g.n && clique; ++i) {
      if (!((sub >> i) & 1)) continue;
      for (int j = i + 1; j < g.n && clique; ++j) {
        if (((sub >> j) & 1) && !has_edge(g, i, j)) clique = false;
      }
    }
    if (!clique) continue;
    bool maximal = true;
    for (int v = 0; v < g.n && maximal; ++v) {
      if ((sub >> v) & 1) continue;
      bool joins_all = true;
      for (int i = 0; i < g.n && joins_all; ++i) {
        if (((sub >> i) & 1) && !has_edge(g, i, v)) joins_all = false;
      }
      if (joins_all) maximal = false;
    }
    if (!maximal) continue;

    int size = std::popcount(sub);
    membership += size;
    if (size == 4) {
      int red = 0, green = 0;
      for (int v = 0; v < g.n; ++v) {
        if ((sub >> v) & 1) (color_of(g, v) == 0 ? red : green)++;
      }
      match_sum += std::max(red, green) >= 3 ? 1.0 : 0.5;
    }
  }
  return std::max(match_sum - membership + g.n - 1, -10.0);
}

double neighbors_reference(const ColoredGraph& g) {
  int correct = 0;
  for (int i = 0; i < g.n; ++i) {
    int diff = 0;
    for (int j = 0; j < g.n; ++j) {
      if (j != i && has_edge(g, i, j) && color_of(g, i) != color_of(g, j)) ++diff;
    }
    if (diff % 2 == 0) ++correct;
  }
  return (g.n > 3 ? double(correct - g.n) : -5.0) * 10.0 / 7.0;
}

double counting_reference(const ColoredGraph& g) {
  int red = 0, green = 0;
  for (int i = 0; i < g.n; ++i) (color_of(g, i) == 0 ? red : green)++;
  return -std::abs(red + green / 2.0 - 3.0) / 4.0 * 10.0;
}

ColoredGraph random_connected(Rng& rng, int max_nodes = 7) {
  int n = 1 + static_cast<int>(rng.uniform_below(max_nodes));
  ColoredGraph g;
  g.n = static_cast<std::uint8_t>(n);
  g.colors = static_cast<std::uint8_t>(rng.uniform_below(1u << n));
  for (int v = 1; v < n; ++v) g = with_edge(g, static_cast<int>(rng.uniform_below(v)), v);
  int extras = static_cast<int>(rng.uniform_below(n + 1));
  for (int k = 0; k < extras; ++k) {
    int u = static_cast<int>(rng.uniform_below(n));
    int v = static_cast<int>(rng.uniform_below(n));
    if (u != v) g = with_edge(g, u, v);
  }
  return g;
}

}  // namespace

TEST_CASE("counting task examples") {
  CHECK(counting_log_reward(from_edges(3, 0b000, {{0, 1}, {1, 2}})) == doctest::Approx(0.0));
  CHECK(counting_log_reward(from_edges(1, 0b0, {})) == doctest::Approx(-5.0));
  ColoredGraph all_green = from_edges(7, 0b1111111,
                                      {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}});
  CHECK(counting_log_reward(all_green) == doctest::Approx(-1.25));
}

TEST_CASE("neighbors task examples") {
  CHECK(neighbors_log_reward(from_edges(3, 0b010, {{0, 1}, {1, 2}})) ==
        doctest::Approx(-50.0 / 7.0));
  CHECK(neighbors_log_reward(from_edges(2, 0b01, {{0, 1}})) == doctest::Approx(-50.0 / 7.0));
  // 4-node all-red path: zero opposite neighbours everywhere, t = n.
  CHECK(neighbors_log_reward(from_edges(4, 0, {{0, 1}, {1, 2}, {2, 3}})) == doctest::Approx(0.0));
  // 7-node star, red centre, green leaves: only the centre counts.
  ColoredGraph star = from_edges(7, 0b1111110,
                                 {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}, {0, 6}});
  CHECK(neighbors_log_reward(star) == doctest::Approx(-60.0 / 7.0));
}

TEST_CASE("cliques task examples") {
  CHECK(cliques_log_reward(from_edges(1, 0, {})) == doctest::Approx(-1.0));
  ColoredGraph k4 = from_edges(4, 0, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  CHECK(cliques_log_reward(k4) == doctest::Approx(0.0));
  // 2-2 colored K4 scores 0.5 instead of 1.
  ColoredGraph k4_mixed = from_edges(4, 0b0011, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  CHECK(cliques_log_reward(k4_mixed) == doctest::Approx(-0.5));
}

TEST_CASE("graph rewards match the reference implementations on random states") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    ColoredGraph g = random_connected(rng);
    CHECK(cliques_log_reward(g) == doctest::Approx(cliques_reference(g)).epsilon(1e-12));
    CHECK(neighbors_log_reward(g) == doctest::Approx(neighbors_reference(g)).epsilon(1e-12));
    CHECK(counting_log_reward(g) == doctest::Approx(counting_reference(g)).epsilon(1e-12));
  }
}

TEST_CASE("graph log-rewards lie in [-10, 0] across the whole 5-node space") {
  EnvConfig cfg;
  cfg.kind = EnvKind::graph;
  cfg.graph.max_nodes = 5;
  auto space = enumerate_space(cfg);
  for (const char* task : {"counting", "neighbors", "cliques"}) {
    auto table = build_reward_table(space, task, 1);
    for (double v : table.log_r) {
      CHECK(v <= 0.0 + 1e-12);
      CHECK(v >= -10.0 - 1e-12);
    }
  }
}

TEST_CASE("grid corners values") {
  GridConfig cfg;  // M = 64
  CHECK(grid_log_reward("constant", {13, 7}, cfg) == doctest::Approx(0.0));
  CHECK(grid_log_reward("corners", {31, 31}, cfg) == doctest::Approx(std::log(0.01)));
  CHECK(grid_log_reward("corners", {0, 0}, cfg) == doctest::Approx(std::log(0.51)));
  // A cell with both u-coordinates inside (0.3, 0.4): x/63 - 0.5 in band.
  CHECK(grid_log_reward("corners", {9, 9}, cfg) == doctest::Approx(std::log(2.51)));
}

TEST_CASE("grid branin/currin are normalized into [-10, 0]") {
  EnvConfig cfg;
  cfg.kind = EnvKind::grid;
  cfg.grid.size = 16;
  auto space = enumerate_space(cfg);
  for (const char* task : {"branin", "currin"}) {
    auto table = build_reward_table(space, task, 1);
    double lo = 1e9, hi = -1e9;
    for (double v : table.log_r) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    CHECK(lo == doctest::Approx(-10.0));
    CHECK(hi == doctest::Approx(0.0));
  }
  CHECK_THROWS_AS(build_reward_table(space, "nope", 1), std::invalid_argument);
}

TEST_CASE("sequence reward from the mode set") {
  ModeSet modes;
  modes.modes.push_back(bitstring_from_text("0101"));
  modes.modes.push_back(bitstring_from_text("111"));
  CHECK(seq_log_reward(bitstring_from_text("0101"), modes, 15) == doctest::Approx(0.0));
  CHECK(seq_log_reward(bitstring_from_text("011"), modes, 15) == doctest::Approx(-10.0 / 15.0));
}

TEST_CASE("skew transform") {
  CHECK(skew_transform(-3.0, 0.0) == doctest::Approx(-3.0));
  CHECK(skew_transform(0.0, 5.0) == doctest::Approx(0.0));
  CHECK(skew_transform(-10.0, 0.2) == doctest::Approx(-10.0 * std::exp(2.0)));
  CHECK_THROWS_AS(skew_transform(0.5, 0.1), std::invalid_argument);
}

TEST_CASE("skew transform preserves order for log-rewards <= 0") {
  Rng rng(31);
  for (int trial = 0; trial < 2000; ++trial) {
    double a = -10.0 * rng.uniform();
    double b = -10.0 * rng.uniform();
    double gamma = 0.5 * rng.uniform();
    if (a == b) continue;
    double lo = std::min(a, b), hi = std::max(a, b);
    CHECK(skew_transform(lo, gamma) < skew_transform(hi, gamma));
  }
}

TEST_CASE("shuffle preserves the value multiset and is seed-deterministic") {
  EnvConfig cfg;
  cfg.kind = EnvKind::graph;
  cfg.graph.max_nodes = 4;
  auto space = enumerate_space(cfg);
  auto table = build_reward_table(space, "counting", 1);

  auto s1 = shuffle_rewards(table, 5);
  auto s2 = shuffle_rewards(table, 5);
  auto s3 = shuffle_rewards(table, 6);
  CHECK(s1.log_r == s2.log_r);
  CHECK(s1.log_r != s3.log_r);

  auto sorted_orig = table.log_r;
  auto sorted_shuf = s1.log_r;
  std::sort(sorted_orig.begin(), sorted_orig.end());
  std::sort(sorted_shuf.begin(), sorted_shuf.end());
  CHECK(sorted_orig == sorted_shuf);

  auto constant = build_reward_table(space, "constant", 1);
  auto shuffled_const = shuffle_rewards(constant, 9);
  CHECK(shuffled_const.log_r == constant.log_r);
}

TEST_CASE("noise corruption floors at exp(-10) and is deterministic") {
  EnvConfig cfg;
  cfg.kind = EnvKind::graph;
  cfg.graph.max_nodes = 4;
  auto space = enumerate_space(cfg);
  auto constant = build_reward_table(space, "constant", 1);

  auto c0 = corrupt_rewards(constant, 0.0, 3);
  for (std::size_t i = 0; i < c0.log_r.size(); ++i) {
    CHECK(c0.log_r[i] == doctest::Approx(constant.log_r[i]).epsilon(1e-12));
  }

  auto c1 = corrupt_rewards(constant, 2.0, 3);
  auto c2 = corrupt_rewards(constant, 2.0, 3);
  CHECK(c1.log_r == c2.log_r);
  bool floored = false;
  for (double v : c1.log_r) {
    CHECK(v >= -10.0 - 1e-12);
    CHECK(std::isfinite(v));
    if (v == doctest::Approx(-10.0)) floored = true;
  }
  // sigma = 2 around R = 1 pushes plenty of draws below zero.
  CHECK(floored);
}

TEST_CASE("bron-kerbosch agrees with subset enumeration on clique counts") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    ColoredGraph g = random_connected(rng);
    auto cliques = maximal_cliques(g);
    std::map<int, int> by_size;
    for (auto c : cliques) by_size[std::popcount(c)] += 1;
    // Re-derive the count via the reference scorer's loop.
    int ref_count = 0;
    for (std::uint32_t sub = 1; sub < (1u << g.n); ++sub) {
      bool clique = true;
      for (int i = 0; i < g.n && clique; ++i) {
        if (!((sub >> i) & 1)) continue;
        for (int j = i + 1; j < g.n && clique; ++j) {
          if (((sub >> j) & 1) && !has_edge(g, i, j)) clique = false;
        }
      }
      if (!clique) continue;
      bool maximal = true;
      for (int v = 0; v < g.n && maximal; ++v) {
        if ((sub >> v) & 1) continue;
        bool joins_all = true;
        for (int i = 0; i < g.n && joins_all; ++i) {
          if (((sub >> i) & 1) && !has_edge(g, i, v)) joins_all = false;
        }
        if (joins_all) maximal = false;
      }
      if (maximal) ++ref_count;
    }
    CHECK(static_cast<int>(cliques.size()) == ref_count);
  }
}
