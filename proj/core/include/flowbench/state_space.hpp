#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowbench/common.hpp"
#include "flowbench/graph_env.hpp"
#include "flowbench/simple_envs.hpp"

namespace flowbench {

struct EnvConfig {
  EnvKind kind = EnvKind::graph;
  GraphGrammar graph;
  GridConfig grid;
  SequenceConfig sequence;

  std::string describe() const;
};

/// The enumerated pointed DAG. Children and parents mirror each other edge
/// for edge (same multiplicities); per-state concrete actions map onto the
/// canonical children so policies can aggregate isomorphic actions.
/// Immutable once built; safe to share across threads.
struct StateSpace {
  EnvConfig config;

  std::vector<std::uint64_t> states;  // canonical encodings

  // Children in CSR form, sorted by canonical key within each state.
  std::vector<std::uint32_t> child_offsets;  // size S+1
  std::vector<StateId> child_ids;
  std::vector<std::uint32_t> child_mult;

  // Parents in CSR form (derived by inverting children); parent_child_slot
  // is the edge's position within the parent's child list.
  std::vector<std::uint32_t> parent_offsets;
  std::vector<StateId> parent_ids;
  std::vector<std::uint32_t> parent_mult;
  std::vector<std::uint32_t> parent_child_slot;

  // Concrete actions per state (CSR). For the graph environment these are
  // packed GraphActions; for grid/sequence, action k is the k-th move.
  std::vector<std::uint32_t> action_offsets;
  std::vector<std::uint16_t> action_codes;
  std::vector<std::uint8_t> action_child_slot;

  std::vector<std::uint8_t> terminable;
  StateId root = 0;
  std::vector<StateId> topo_order;  // permutation of ids
  std::vector<std::uint32_t> topo_rank;

  // Terminable states in ascending id order; terminal_index maps a state
  // id to its slot here (kInvalidState if not terminable).
  std::vector<StateId> terminals;
  std::vector<std::uint32_t> terminal_index;

  std::size_t size() const { return states.size(); }
  std::size_t num_edges() const { return child_ids.size(); }
  std::size_t num_terminals() const { return terminals.size(); }

  /// State count under the environment's reporting convention: the graph
  /// environment counts constructed graphs only (the empty root is
  /// excluded unless count_empty_root is set).
  std::size_t reported_state_count() const;

  std::span<const StateId> children_of(StateId s) const {
    return {child_ids.data() + child_offsets[s], child_ids.data() + child_offsets[s + 1]};
  }
  std::span<const StateId> parents_of(StateId s) const {
    return {parent_ids.data() + parent_offsets[s], parent_ids.data() + parent_offsets[s + 1]};
  }
  std::size_t num_children(StateId s) const { return child_offsets[s + 1] - child_offsets[s]; }
  std::size_t num_parents(StateId s) const { return parent_offsets[s + 1] - parent_offsets[s]; }
  bool is_terminable(StateId s) const { return terminable[s] != 0; }

  /// Human-readable form of one state (graph text / cell / bit string).
  std::string state_text(StateId s) const;
};

/// Breadth-first closure from the environment's root, deduplicated by
/// canonical key. Throws std::invalid_argument for size parameters outside
/// the supported range.
StateSpace enumerate_space(const EnvConfig& config);

/// All states reachable from s by at least one edge (s excluded),
/// ascending id order.
std::vector<StateId> descendants(const StateSpace& space, StateId s);

struct SpaceReport {
  bool ok = true;
  std::string message;  // first counterexample when !ok
};

/// Structural validation: acyclicity, root uniqueness, adjacency duality
/// (including multiplicities), reachability from the root, reachability of
/// a terminable state from everywhere, topological consistency. Returns a
/// failure report instead of aborting.
SpaceReport validate_space(const StateSpace& space);

/// Versioned binary container ("FBSS").
std::vector<std::uint8_t> serialize_space(const StateSpace& space);
StateSpace deserialize_space(std::span<const std::uint8_t> bytes);

/// Human-readable dump for small spaces (guarded by max_states).
std::string space_to_json(const StateSpace& space, std::size_t max_states = 20000);

/// A complete trajectory visits DAG-adjacent states and ends with a stop
/// at a terminable state. steps[i].second is the child slot taken from
/// steps[i].first (kStopAction for the final stop).
struct Trajectory {
  static constexpr std::uint32_t kStopAction = 0xffffffffu;
  std::vector<std::pair<StateId, std::uint32_t>> steps;
  StateId terminal = kInvalidState;
  bool complete = false;
};

/// Validates DAG adjacency of consecutive steps and the stop convention.
bool trajectory_valid(const StateSpace& space, const Trajectory& traj);

}  // namespace flowbench
