#include "doctest.h"
#include "flowbench/metrics.hpp"
#include "flowbench/rng.hpp"
#include "flowbench/split.hpp"

#include <cmath>
#include <set>

using namespace flowbench;

namespace {

EnvConfig graph_cfg(int max_nodes) {
  EnvConfig cfg;
  cfg.kind = EnvKind::graph;
  cfg.graph.max_nodes = max_nodes;
  return cfg;
}

DistributionTable dist_of(std::vector<double> probs) {
  DistributionTable d;
  for (double p : probs) d.log_p.push_back(p > 0 ? std::log(p) : kNegInf);
  return d;
}

}  // namespace

TEST_CASE("js divergence basics") {
  auto p = dist_of({0.5, 0.5});
  auto q = dist_of({0.25, 0.75});
  CHECK(js_divergence(p, p) == doctest::Approx(0.0));
  CHECK(js_divergence(p, q) == doctest::Approx(0.033822).epsilon(1e-3));
  CHECK(js_divergence(p, q) == doctest::Approx(js_divergence(q, p)).epsilon(1e-12));

  auto a = dist_of({1.0, 0.0});
  auto b = dist_of({0.0, 1.0});
  CHECK(js_divergence(a, b) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  auto c = dist_of({0.3, 0.7});
  CHECK_THROWS_AS(js_divergence(a, dist_of({1.0})), std::invalid_argument);
  (void)c;
}

TEST_CASE("js stays within [0, ln 2] on random pairs and vanishes only at equality") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 2 + static_cast<int>(rng.uniform_below(6));
    std::vector<double> pv(n), qv(n);
    double ps = 0, qs = 0;
    for (int i = 0; i < n; ++i) {
      pv[i] = rng.uniform() + 1e-3;
      qv[i] = rng.uniform() + 1e-3;
      ps += pv[i];
      qs += qv[i];
    }
    for (int i = 0; i < n; ++i) {
      pv[i] /= ps;
      qv[i] /= qs;
    }
    double js = js_divergence(dist_of(pv), dist_of(qv));
    CHECK(js >= -1e-12);
    CHECK(js <= std::log(2.0) + 1e-12);
    CHECK(js_divergence(dist_of(pv), dist_of(pv)) == doctest::Approx(0.0));
  }
}

TEST_CASE("mae over log probabilities") {
  auto p = dist_of({0.5, 0.5});
  auto q = dist_of({0.25, 0.75});
  CHECK(mae_log(p, q) == doctest::Approx((std::log(2.0) + std::log(1.5)) / 2.0).epsilon(1e-12));
  CHECK(mae_log(p, p) == doctest::Approx(0.0));
}

TEST_CASE("spearman examples and properties") {
  std::vector<double> a{1, 2, 3};
  CHECK(spearman(a, a) == doctest::Approx(1.0));
  std::vector<double> rev{3, 2, 1};
  CHECK(spearman(a, rev) == doctest::Approx(-1.0));
  std::vector<double> b{1, 3, 2};
  CHECK(spearman(a, b) == doctest::Approx(0.5));

  std::vector<double> flat{2, 2, 2};
  CHECK(std::isnan(spearman(a, flat)));

  // Invariance under strictly increasing transforms.
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 3 + static_cast<int>(rng.uniform_below(20));
    std::vector<double> x(n), y(n), tx(n);
    for (int i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = rng.normal();
      tx[i] = std::exp(0.5 * x[i]) + 3.0;  // strictly increasing in x
    }
    CHECK(spearman(x, y) == doctest::Approx(spearman(tx, y)).epsilon(1e-12));
  }
}

TEST_CASE("graph split: closure, determinism, fraction, root sizes") {
  auto space = enumerate_space(graph_cfg(5));
  auto split = make_test_split(space, 0.1, 42);

  CHECK(split.test_states.size() + split.train_terminals.size() == space.num_terminals());
  CHECK(double(split.test_states.size()) >= 0.1 * double(space.num_terminals()));

  // Descendant closure: every terminable descendant of a test state is in
  // the test set.
  std::set<StateId> test_set(split.test_states.begin(), split.test_states.end());
  for (StateId s : split.picked_roots) {
    CHECK(decode_graph(space.states[s]).n >= 4);  // max_nodes - 1 rule
    for (StateId d : descendants(space, s)) {
      if (space.is_terminable(d)) CHECK(test_set.count(d) == 1);
    }
  }

  auto split2 = make_test_split(space, 0.1, 42);
  CHECK(split2.test_states == split.test_states);
  auto split3 = make_test_split(space, 0.1, 43);
  CHECK(split3.test_states != split.test_states);

  CHECK_THROWS_AS(make_test_split(space, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_test_split(space, 1.0, 1), std::invalid_argument);
}

TEST_CASE("sequence and grid splits") {
  EnvConfig seq;
  seq.kind = EnvKind::sequence;
  seq.sequence.max_len = 8;
  auto sspace = enumerate_space(seq);
  auto ssplit = make_test_split(sspace, 0.1, 7);
  CHECK(double(ssplit.test_states.size()) >= 0.1 * double(sspace.num_terminals()));
  for (StateId r : ssplit.picked_roots) {
    CHECK(decode_bitstring(sspace.states[r]).length >= 5);
  }

  EnvConfig grid;
  grid.kind = EnvKind::grid;
  grid.grid.size = 8;
  auto gspace = enumerate_space(grid);
  auto gsplit = make_test_split(gspace, 0.25, 7);
  CHECK(gsplit.test_states.size() == 16);
}

TEST_CASE("split json round trip") {
  auto space = enumerate_space(graph_cfg(4));
  auto split = make_test_split(space, 0.2, 9);
  auto text = split_to_json(space, split);
  auto restored = split_from_json(space, text);
  CHECK(restored.test_states == split.test_states);
  CHECK(restored.train_terminals == split.train_terminals);
  CHECK(restored.picked_roots == split.picked_roots);
}

TEST_CASE("rank metrics on the true distribution") {
  auto space = enumerate_space(graph_cfg(5));
  auto split = make_test_split(space, 0.15, 3);
  auto rewards = build_reward_table(space, "counting", 1);
  auto truth = true_terminal_logprobs(rewards);

  auto rm = rank_metrics(space, truth, rewards, split, 100);
  CHECK(rm.test_spearman == doctest::Approx(1.0));

  // Optimal objects tie at the top; with the id tie-break their mean rank
  // is (m - 1) / 2.
  double best = -1e300;
  int m = 0;
  for (StateId s : split.test_states) {
    best = std::max(best, rewards.log_r[space.terminal_index[s]]);
  }
  for (StateId s : split.test_states) {
    if (rewards.log_r[space.terminal_index[s]] == best) ++m;
  }
  CHECK(rm.mean_rank_optimal == doctest::Approx((m - 1) / 2.0));

  // Total probability of the test set under the true law.
  double expect = 0.0;
  for (StateId s : split.test_states) expect += std::exp(truth.log_p[space.terminal_index[s]]);
  CHECK(rm.total_test_prob == doctest::Approx(expect).epsilon(1e-12));

  // k larger than the test set clamps.
  auto rm2 = rank_metrics(space, truth, rewards, split, 1 << 20);
  CHECK(rm2.k_clamped);
}
