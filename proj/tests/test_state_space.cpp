#include "doctest.h"
#include "flowbench/rng.hpp"
#include "flowbench/state_space.hpp"

#include <algorithm>
#include <set>

using namespace flowbench;

namespace {

EnvConfig graph_env(int max_nodes = 7) {
  EnvConfig cfg;
  cfg.kind = EnvKind::graph;
  cfg.graph.max_nodes = max_nodes;
  return cfg;
}

EnvConfig grid_env(int size) {
  EnvConfig cfg;
  cfg.kind = EnvKind::grid;
  cfg.grid.size = size;
  return cfg;
}

EnvConfig seq_env(int max_len) {
  EnvConfig cfg;
  cfg.kind = EnvKind::sequence;
  cfg.sequence.max_len = max_len;
  return cfg;
}

}  // namespace

TEST_CASE("small space counts") {
  CHECK(enumerate_space(grid_env(4)).size() == 16);
  CHECK(enumerate_space(seq_env(4)).size() == 31);

  auto g3 = enumerate_space(graph_env(3));
  // empty root + 2 + 3 + 10 colored connected graphs
  CHECK(g3.size() == 16);
  CHECK(g3.reported_state_count() == 15);
}

TEST_CASE("sequence space of depth 15 has 65535 states") {
  auto space = enumerate_space(seq_env(15));
  CHECK(space.size() == 65535);
  CHECK(space.num_terminals() == 65534);
  CHECK(validate_space(space).ok);
}

TEST_CASE("topological order respects every edge") {
  auto space = enumerate_space(graph_env(4));
  for (std::size_t s = 0; s < space.size(); ++s) {
    for (StateId c : space.children_of(static_cast<StateId>(s))) {
      CHECK(space.topo_rank[s] < space.topo_rank[c]);
    }
  }
}

TEST_CASE("adjacency duality including multiplicities") {
  auto space = enumerate_space(graph_env(5));
  std::size_t checked = 0;
  for (std::size_t s = 0; s < space.size(); ++s) {
    for (std::uint32_t e = space.child_offsets[s]; e < space.child_offsets[s + 1]; ++e) {
      StateId c = space.child_ids[e];
      bool found = false;
      for (std::uint32_t p = space.parent_offsets[c]; p < space.parent_offsets[c + 1]; ++p) {
        if (space.parent_ids[p] == s) {
          CHECK(space.parent_mult[p] == space.child_mult[e]);
          CHECK(space.parent_child_slot[p] == e - space.child_offsets[s]);
          found = true;
        }
      }
      CHECK(found);
      ++checked;
    }
  }
  CHECK(checked == space.num_edges());
}

TEST_CASE("re-enumeration is bit-identical") {
  auto a = serialize_space(enumerate_space(graph_env(4)));
  auto b = serialize_space(enumerate_space(graph_env(4)));
  CHECK(a == b);

  auto restored = deserialize_space(a);
  CHECK(serialize_space(restored) == a);
}

TEST_CASE("descendants: leaves, root, transitivity") {
  auto space = enumerate_space(graph_env(4));

  CHECK(descendants(space, space.root).size() == space.size() - 1);

  // A childless state has no descendants.
  for (std::size_t s = 0; s < space.size(); ++s) {
    if (space.num_children(static_cast<StateId>(s)) == 0) {
      CHECK(descendants(space, static_cast<StateId>(s)).empty());
      break;
    }
  }

  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    StateId s = static_cast<StateId>(rng.uniform_below(space.size()));
    auto ds = descendants(space, s);
    std::set<StateId> dset(ds.begin(), ds.end());
    for (StateId mid : ds) {
      for (StateId deep : descendants(space, mid)) {
        CHECK(dset.count(deep) == 1);
      }
    }
  }
}

TEST_CASE("validation catches an injected back-edge") {
  auto space = enumerate_space(grid_env(4));
  REQUIRE(validate_space(space).ok);

  // Add an edge from the last topo state back to the root's first child.
  StateId late = space.topo_order.back();
  StateId early = space.child_ids[space.child_offsets[space.root]];
  space.child_ids.insert(space.child_ids.begin() + space.child_offsets[late + 1], early);
  space.child_mult.insert(space.child_mult.begin() + space.child_offsets[late + 1], 1);
  for (std::size_t s = late + 1; s < space.child_offsets.size(); ++s) space.child_offsets[s] += 1;
  space.parent_ids.insert(space.parent_ids.begin() + space.parent_offsets[early + 1], late);
  space.parent_mult.insert(space.parent_mult.begin() + space.parent_offsets[early + 1], 1);
  space.parent_child_slot.insert(
      space.parent_child_slot.begin() + space.parent_offsets[early + 1],
      space.child_offsets[late + 1] - space.child_offsets[late] - 1);
  for (std::size_t s = early + 1; s < space.parent_offsets.size(); ++s) space.parent_offsets[s] += 1;

  auto report = validate_space(space);
  CHECK(!report.ok);
  CHECK(!report.message.empty());
}

TEST_CASE("validation catches an orphaned state") {
  auto space = enumerate_space(grid_env(3));
  REQUIRE(validate_space(space).ok);

  // Append a state nobody points to.
  space.states.push_back(encode_cell({9, 9}));
  space.child_offsets.push_back(space.child_offsets.back());
  space.parent_offsets.push_back(space.parent_offsets.back());
  space.action_offsets.push_back(space.action_offsets.back());
  space.terminable.push_back(1);
  space.topo_order.push_back(static_cast<StateId>(space.size() - 1));
  space.topo_rank.push_back(static_cast<std::uint32_t>(space.size() - 1));

  auto report = validate_space(space);
  CHECK(!report.ok);
}

TEST_CASE("rejects out-of-range size parameters") {
  EnvConfig bad = graph_env(8);
  CHECK_THROWS_AS(enumerate_space(bad), std::invalid_argument);
  CHECK_THROWS_AS(enumerate_space(seq_env(17)), std::invalid_argument);
  CHECK_THROWS_AS(enumerate_space(grid_env(1)), std::invalid_argument);
}

TEST_CASE("trajectory validity") {
  auto space = enumerate_space(grid_env(4));
  Trajectory traj;
  traj.steps.emplace_back(space.root, 0);
  StateId next = space.child_ids[space.child_offsets[space.root]];
  traj.steps.emplace_back(next, Trajectory::kStopAction);
  traj.terminal = next;
  traj.complete = true;
  CHECK(trajectory_valid(space, traj));

  traj.terminal = space.root;
  CHECK(!trajectory_valid(space, traj));
}

TEST_CASE("json dump guards against large spaces") {
  auto small = enumerate_space(grid_env(3));
  CHECK(space_to_json(small).find("(0,0)") != std::string::npos);
  auto big = enumerate_space(seq_env(15));
  CHECK_THROWS_AS(space_to_json(big), FlowbenchError);
}
