#include "flowbench/split.hpp"

#include <algorithm>

#include "flowbench/rng.hpp"
#include "json.hpp"

namespace flowbench {

namespace {

void insert_with_descendants(const StateSpace& space, StateId root, SplitSpec& split,
                             std::size_t& test_count) {
  if (!split.in_test[root] && space.is_terminable(root)) {
    split.in_test[root] = 1;
    ++test_count;
  }
  for (StateId d : descendants(space, root)) {
    if (!split.in_test[d] && space.is_terminable(d)) {
      split.in_test[d] = 1;
      ++test_count;
    }
  }
}

}  // namespace

SplitSpec make_test_split(const StateSpace& space, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("split fraction must be in (0, 1)");
  }

  SplitSpec split;
  split.fraction = fraction;
  split.seed = seed;
  split.in_test.assign(space.size(), 0);

  const double target = fraction * double(space.num_terminals());
  Rng rng(derive_seed(seed, "test-split"));
  std::size_t test_count = 0;

  if (space.config.kind == EnvKind::grid) {
    // i.i.d. cell hold-out.
    std::size_t want = static_cast<std::size_t>(std::ceil(target));
    for (std::uint64_t idx : rng.sample_without_replacement(space.num_terminals(), want)) {
      split.in_test[space.terminals[idx]] = 1;
    }
    test_count = want;
  } else {
    // Candidate roots: large states whose exclusion drags whole subtrees.
    std::vector<StateId> candidates;
    for (StateId s : space.terminals) {
      if (space.config.kind == EnvKind::graph) {
        int min_nodes = std::max(1, space.config.graph.max_nodes - 1);
        if (decode_graph(space.states[s]).n >= min_nodes) candidates.push_back(s);
      } else {
        int min_len = std::max(1, space.config.sequence.max_len - 3);
        if (decode_bitstring(space.states[s]).length >= min_len) candidates.push_back(s);
      }
    }
    if (candidates.empty()) throw FlowbenchError("no candidate split roots in this space");

    std::size_t stuck_guard = 0;
    while (double(test_count) < target && stuck_guard < candidates.size() * 64) {
      StateId pick = candidates[rng.uniform_below(candidates.size())];
      if (split.in_test[pick]) {
        ++stuck_guard;
        continue;
      }
      split.picked_roots.push_back(pick);
      insert_with_descendants(space, pick, split, test_count);
    }
  }

  for (StateId s : space.terminals) {
    (split.in_test[s] ? split.test_states : split.train_terminals).push_back(s);
  }
  return split;
}

std::string split_to_json(const StateSpace& space, const SplitSpec& split) {
  nlohmann::json j;
  j["seed"] = split.seed;
  j["fraction"] = split.fraction;
  j["test_size"] = split.test_states.size();
  std::vector<std::string> roots;
  for (StateId r : split.picked_roots) roots.push_back(space.state_text(r));
  j["picked_roots"] = roots;
  j["picked_root_ids"] = split.picked_roots;
  j["test_states"] = split.test_states;
  return j.dump(2);
}

SplitSpec split_from_json(const StateSpace& space, const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  SplitSpec split;
  split.seed = j.at("seed").get<std::uint64_t>();
  split.fraction = j.at("fraction").get<double>();
  split.picked_roots = j.at("picked_root_ids").get<std::vector<StateId>>();
  split.test_states = j.at("test_states").get<std::vector<StateId>>();
  split.in_test.assign(space.size(), 0);
  for (StateId s : split.test_states) split.in_test[s] = 1;
  for (StateId s : space.terminals) {
    if (!split.in_test[s]) split.train_terminals.push_back(s);
  }
  return split;
}

}  // namespace flowbench
