#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowbench/state_space.hpp"

namespace flowbench {

/// Structured train/test split over terminal states. For the graph
/// environment the test set is descendant-closed: each picked root (a
/// state with at least min_pick_nodes nodes) brings all its terminable
/// descendants along. Sequence spaces use the analogous subtree exclusion
/// rooted at long strings; grids hold out cells i.i.d.
struct SplitSpec {
  double fraction = 0.1;
  std::uint64_t seed = 0;
  std::vector<StateId> picked_roots;
  std::vector<StateId> test_states;       // sorted terminal ids
  std::vector<StateId> train_terminals;   // sorted terminal ids
  std::vector<std::uint8_t> in_test;      // indexed by state id

  bool is_test(StateId s) const { return in_test[s] != 0; }
};

/// Graph picks need >= 6 of 7 nodes; smaller caps scale the rule to
/// max_nodes - 1. Sequence roots are strings of length >= max_len - 3.
SplitSpec make_test_split(const StateSpace& space, double fraction, std::uint64_t seed);

std::string split_to_json(const StateSpace& space, const SplitSpec& split);
SplitSpec split_from_json(const StateSpace& space, const std::string& json_text);

}  // namespace flowbench
