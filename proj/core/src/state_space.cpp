#include "flowbench/state_space.hpp"

#include <algorithm>
#include <deque>
#include <queue>
#include <sstream>
#include <unordered_map>

#include "flowbench/binio.hpp"

namespace flowbench {

namespace {

struct ChildRecord {
  std::uint64_t key;
  std::uint32_t multiplicity;
  std::vector<std::uint16_t> action_codes;
};

std::vector<ChildRecord> env_children(const EnvConfig& cfg, std::uint64_t state) {
  std::vector<ChildRecord> out;
  switch (cfg.kind) {
    case EnvKind::graph: {
      for (auto& child : graph_children(decode_graph(state), cfg.graph)) {
        ChildRecord rec{child.key, child.multiplicity, {}};
        rec.action_codes.reserve(child.actions.size());
        for (const auto& act : child.actions) rec.action_codes.push_back(act.pack());
        out.push_back(std::move(rec));
      }
      break;
    }
    case EnvKind::grid: {
      GridCell c = decode_cell(state);
      for (const GridCell& child : grid_children(c, cfg.grid)) {
        std::uint16_t code = child.x == c.x + 1 ? 0 : 1;  // 0 = x+, 1 = y+
        out.push_back({encode_cell(child), 1, {code}});
      }
      break;
    }
    case EnvKind::sequence: {
      BitString b = decode_bitstring(state);
      std::uint16_t code = 0;
      for (const BitString& child : seq_children(b, cfg.sequence)) {
        out.push_back({encode_bitstring(child), 1, {code++}});
      }
      break;
    }
  }
  std::sort(out.begin(), out.end(),
            [](const ChildRecord& a, const ChildRecord& b) { return a.key < b.key; });
  return out;
}

bool env_terminable(const EnvConfig& cfg, std::uint64_t state) {
  switch (cfg.kind) {
    case EnvKind::graph: return graph_terminable(decode_graph(state));
    case EnvKind::grid: return grid_terminable(decode_cell(state), cfg.grid);
    case EnvKind::sequence: return seq_terminable(decode_bitstring(state));
  }
  return false;
}

std::uint64_t env_root(const EnvConfig& cfg) {
  switch (cfg.kind) {
    case EnvKind::graph: return encode_graph(ColoredGraph{});
    case EnvKind::grid: return encode_cell({0, 0});
    case EnvKind::sequence: return encode_bitstring(BitString{});
  }
  return 0;
}

void check_config(const EnvConfig& cfg) {
  switch (cfg.kind) {
    case EnvKind::graph:
      if (cfg.graph.max_nodes < 1 || cfg.graph.max_nodes > ColoredGraph::kMaxNodes) {
        throw std::invalid_argument("graph env supports 1..7 nodes");
      }
      break;
    case EnvKind::grid:
      if (cfg.grid.size < 2 || cfg.grid.size > 4096) {
        throw std::invalid_argument("grid size must be in 2..4096");
      }
      break;
    case EnvKind::sequence:
      if (cfg.sequence.max_len < 1 || cfg.sequence.max_len > 16) {
        throw std::invalid_argument("sequence max length must be in 1..16");
      }
      break;
  }
}

}  // namespace

std::string EnvConfig::describe() const {
  std::ostringstream os;
  os << env_kind_name(kind);
  switch (kind) {
    case EnvKind::graph:
      os << "(max_nodes=" << graph.max_nodes
         << ", allow_disconnected=" << (graph.allow_disconnected ? 1 : 0)
         << ", count_empty_root=" << (graph.count_empty_root ? 1 : 0) << ")";
      break;
    case EnvKind::grid:
      os << "(size=" << grid.size
         << ", boundary_forced_stop=" << (grid.boundary_forced_stop ? 1 : 0) << ")";
      break;
    case EnvKind::sequence:
      os << "(max_len=" << sequence.max_len << ")";
      break;
  }
  return os.str();
}

std::size_t StateSpace::reported_state_count() const {
  if (config.kind == EnvKind::graph && !config.graph.count_empty_root) {
    return states.size() - 1;
  }
  return states.size();
}

std::string StateSpace::state_text(StateId s) const {
  switch (config.kind) {
    case EnvKind::graph: return graph_to_text(decode_graph(states[s]));
    case EnvKind::grid: {
      GridCell c = decode_cell(states[s]);
      return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")";
    }
    case EnvKind::sequence: {
      std::string t = bitstring_to_text(decode_bitstring(states[s]));
      return t.empty() ? "<empty>" : t;
    }
  }
  return "?";
}

StateSpace enumerate_space(const EnvConfig& config) {
  check_config(config);

  StateSpace space;
  space.config = config;

  std::unordered_map<std::uint64_t, StateId> index;
  std::deque<StateId> queue;

  auto intern = [&](std::uint64_t key) -> StateId {
    auto [it, inserted] = index.emplace(key, static_cast<StateId>(space.states.size()));
    if (inserted) {
      space.states.push_back(key);
      queue.push_back(it->second);
    }
    return it->second;
  };

  intern(env_root(config));
  space.root = 0;

  space.child_offsets.push_back(0);
  space.action_offsets.push_back(0);

  // Children/actions are appended in pop order, which equals id order
  // because ids are assigned by BFS discovery.
  while (!queue.empty()) {
    StateId s = queue.front();
    queue.pop_front();
    auto children = env_children(config, space.states[s]);
    for (std::size_t slot = 0; slot < children.size(); ++slot) {
      const auto& rec = children[slot];
      StateId c = intern(rec.key);
      space.child_ids.push_back(c);
      space.child_mult.push_back(rec.multiplicity);
      for (std::uint16_t code : rec.action_codes) {
        space.action_codes.push_back(code);
        space.action_child_slot.push_back(static_cast<std::uint8_t>(slot));
      }
    }
    space.child_offsets.push_back(static_cast<std::uint32_t>(space.child_ids.size()));
    space.action_offsets.push_back(static_cast<std::uint32_t>(space.action_codes.size()));
  }

  const std::size_t S = space.states.size();

  space.terminable.resize(S);
  for (std::size_t s = 0; s < S; ++s) {
    space.terminable[s] = env_terminable(config, space.states[s]) ? 1 : 0;
  }

  // Invert children to parents; iteration in id order keeps parent lists
  // sorted by parent id.
  std::vector<std::uint32_t> parent_counts(S, 0);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::uint32_t e = space.child_offsets[s]; e < space.child_offsets[s + 1]; ++e) {
      parent_counts[space.child_ids[e]] += 1;
    }
  }
  space.parent_offsets.resize(S + 1, 0);
  for (std::size_t s = 0; s < S; ++s) {
    space.parent_offsets[s + 1] = space.parent_offsets[s] + parent_counts[s];
  }
  space.parent_ids.resize(space.child_ids.size());
  space.parent_mult.resize(space.child_ids.size());
  space.parent_child_slot.resize(space.child_ids.size());
  std::vector<std::uint32_t> fill(S, 0);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::uint32_t e = space.child_offsets[s]; e < space.child_offsets[s + 1]; ++e) {
      StateId c = space.child_ids[e];
      std::uint32_t pos = space.parent_offsets[c] + fill[c]++;
      space.parent_ids[pos] = static_cast<StateId>(s);
      space.parent_mult[pos] = space.child_mult[e];
      space.parent_child_slot[pos] = e - space.child_offsets[s];
    }
  }

  // Kahn's algorithm with smallest-id tie-breaking.
  space.topo_order.reserve(S);
  {
    std::vector<std::uint32_t> indegree(S);
    std::priority_queue<StateId, std::vector<StateId>, std::greater<StateId>> ready;
    for (std::size_t s = 0; s < S; ++s) {
      indegree[s] = space.parent_offsets[s + 1] - space.parent_offsets[s];
      if (indegree[s] == 0) ready.push(static_cast<StateId>(s));
    }
    while (!ready.empty()) {
      StateId s = ready.top();
      ready.pop();
      space.topo_order.push_back(s);
      for (StateId c : space.children_of(s)) {
        if (--indegree[c] == 0) ready.push(c);
      }
    }
  }
  if (space.topo_order.size() != S) {
    throw FlowbenchError("enumerated space is not acyclic");
  }
  space.topo_rank.resize(S);
  for (std::size_t i = 0; i < S; ++i) space.topo_rank[space.topo_order[i]] = static_cast<std::uint32_t>(i);

  space.terminal_index.assign(S, kInvalidState);
  for (std::size_t s = 0; s < S; ++s) {
    if (space.terminable[s]) {
      space.terminal_index[s] = static_cast<std::uint32_t>(space.terminals.size());
      space.terminals.push_back(static_cast<StateId>(s));
    }
  }

  return space;
}

std::vector<StateId> descendants(const StateSpace& space, StateId s) {
  if (s >= space.size()) throw std::invalid_argument("descendants: invalid state id");
  std::vector<std::uint8_t> seen(space.size(), 0);
  std::deque<StateId> queue{s};
  while (!queue.empty()) {
    StateId cur = queue.front();
    queue.pop_front();
    for (StateId c : space.children_of(cur)) {
      if (!seen[c]) {
        seen[c] = 1;
        queue.push_back(c);
      }
    }
  }
  seen[s] = 0;  // s itself is excluded
  std::vector<StateId> out;
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i]) out.push_back(static_cast<StateId>(i));
  }
  return out;
}

SpaceReport validate_space(const StateSpace& space) {
  const std::size_t S = space.size();
  auto fail = [](std::string msg) { return SpaceReport{false, std::move(msg)}; };

  if (S == 0) return fail("empty space");
  if (space.child_offsets.size() != S + 1) return fail("child_offsets size mismatch");

  // Root uniqueness: the root has no parents and nothing else does.
  if (space.num_parents(space.root) != 0) return fail("root has parents");
  for (std::size_t s = 0; s < S; ++s) {
    if (s != space.root && space.num_parents(static_cast<StateId>(s)) == 0) {
      return fail("state " + std::to_string(s) + " has no parents but is not the root");
    }
  }

  // Duality of children/parents, multiplicities included.
  for (std::size_t s = 0; s < S; ++s) {
    for (std::uint32_t e = space.child_offsets[s]; e < space.child_offsets[s + 1]; ++e) {
      StateId c = space.child_ids[e];
      bool found = false;
      for (std::uint32_t p = space.parent_offsets[c]; p < space.parent_offsets[c + 1]; ++p) {
        if (space.parent_ids[p] == s && space.parent_mult[p] == space.child_mult[e]) {
          found = true;
          break;
        }
      }
      if (!found) {
        return fail("edge " + std::to_string(s) + "->" + std::to_string(c) +
                    " missing from parent list (or multiplicity mismatch)");
      }
    }
  }
  if (space.parent_ids.size() != space.child_ids.size()) {
    return fail("parent/child edge count mismatch");
  }

  // Acyclicity via Kahn on the stored adjacency.
  {
    std::vector<std::uint32_t> indegree(S, 0);
    for (StateId c : space.child_ids) indegree[c] += 1;
    std::deque<StateId> ready;
    for (std::size_t s = 0; s < S; ++s) {
      if (indegree[s] == 0) ready.push_back(static_cast<StateId>(s));
    }
    std::size_t visited = 0;
    while (!ready.empty()) {
      StateId s = ready.front();
      ready.pop_front();
      ++visited;
      for (StateId c : space.children_of(s)) {
        if (--indegree[c] == 0) ready.push_back(c);
      }
    }
    if (visited != S) {
      for (std::size_t s = 0; s < S; ++s) {
        if (indegree[s] > 0) {
          return fail("cycle detected through state " + std::to_string(s));
        }
      }
    }
  }

  // Reachability from the root.
  {
    std::vector<std::uint8_t> seen(S, 0);
    seen[space.root] = 1;
    std::deque<StateId> queue{space.root};
    while (!queue.empty()) {
      StateId s = queue.front();
      queue.pop_front();
      for (StateId c : space.children_of(s)) {
        if (!seen[c]) {
          seen[c] = 1;
          queue.push_back(c);
        }
      }
    }
    for (std::size_t s = 0; s < S; ++s) {
      if (!seen[s]) return fail("state " + std::to_string(s) + " unreachable from root");
    }
  }

  // Every state reaches some terminable state (reverse sweep from
  // terminable states over parent edges).
  {
    std::vector<std::uint8_t> ok(S, 0);
    std::deque<StateId> queue;
    for (std::size_t s = 0; s < S; ++s) {
      if (space.terminable[s]) {
        ok[s] = 1;
        queue.push_back(static_cast<StateId>(s));
      }
    }
    while (!queue.empty()) {
      StateId s = queue.front();
      queue.pop_front();
      for (StateId p : space.parents_of(s)) {
        if (!ok[p]) {
          ok[p] = 1;
          queue.push_back(p);
        }
      }
    }
    for (std::size_t s = 0; s < S; ++s) {
      if (!ok[s]) return fail("state " + std::to_string(s) + " cannot reach a terminable state");
    }
  }

  // Topological order places every edge source before its target.
  if (space.topo_order.size() == S && space.topo_rank.size() == S) {
    for (std::size_t s = 0; s < S; ++s) {
      for (StateId c : space.children_of(static_cast<StateId>(s))) {
        if (space.topo_rank[s] >= space.topo_rank[c]) {
          return fail("topological order violated on edge " + std::to_string(s) + "->" +
                      std::to_string(c));
        }
      }
    }
  } else {
    return fail("topological order missing or wrong size");
  }

  return {};
}

std::vector<std::uint8_t> serialize_space(const StateSpace& space) {
  BinWriter w;
  w.magic("FBSS");
  w.u32(1);  // format version
  w.u8(static_cast<std::uint8_t>(space.config.kind));
  w.u8(static_cast<std::uint8_t>(space.config.graph.max_nodes));
  w.u8(space.config.graph.allow_disconnected ? 1 : 0);
  w.u8(space.config.graph.count_empty_root ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(space.config.grid.size));
  w.u8(space.config.grid.boundary_forced_stop ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(space.config.sequence.max_len));
  w.u32(space.root);
  w.array<std::uint64_t>(space.states);
  w.array<std::uint32_t>(space.child_offsets);
  w.array<StateId>(space.child_ids);
  w.array<std::uint32_t>(space.child_mult);
  w.array<std::uint8_t>(space.terminable);
  w.array<StateId>(space.topo_order);
  w.array<std::uint32_t>(space.action_offsets);
  w.array<std::uint16_t>(space.action_codes);
  w.array<std::uint8_t>(space.action_child_slot);
  return w.bytes();
}

StateSpace deserialize_space(std::span<const std::uint8_t> bytes) {
  BinReader r(bytes);
  r.expect_magic("FBSS");
  std::uint32_t version = r.u32();
  if (version != 1) throw FlowbenchError("unsupported FBSS version " + std::to_string(version));

  StateSpace space;
  space.config.kind = static_cast<EnvKind>(r.u8());
  space.config.graph.max_nodes = r.u8();
  space.config.graph.allow_disconnected = r.u8() != 0;
  space.config.graph.count_empty_root = r.u8() != 0;
  space.config.grid.size = static_cast<int>(r.u32());
  space.config.grid.boundary_forced_stop = r.u8() != 0;
  space.config.sequence.max_len = r.u8();
  space.root = r.u32();
  space.states = r.array<std::uint64_t>();
  space.child_offsets = r.array<std::uint32_t>();
  space.child_ids = r.array<StateId>();
  space.child_mult = r.array<std::uint32_t>();
  space.terminable = r.array<std::uint8_t>();
  space.topo_order = r.array<StateId>();
  space.action_offsets = r.array<std::uint32_t>();
  space.action_codes = r.array<std::uint16_t>();
  space.action_child_slot = r.array<std::uint8_t>();

  const std::size_t S = space.states.size();

  space.topo_rank.resize(S);
  for (std::size_t i = 0; i < S; ++i) space.topo_rank[space.topo_order[i]] = static_cast<std::uint32_t>(i);

  std::vector<std::uint32_t> parent_counts(S, 0);
  for (StateId c : space.child_ids) parent_counts[c] += 1;
  space.parent_offsets.resize(S + 1, 0);
  for (std::size_t s = 0; s < S; ++s) {
    space.parent_offsets[s + 1] = space.parent_offsets[s] + parent_counts[s];
  }
  space.parent_ids.resize(space.child_ids.size());
  space.parent_mult.resize(space.child_ids.size());
  space.parent_child_slot.resize(space.child_ids.size());
  std::vector<std::uint32_t> fill(S, 0);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::uint32_t e = space.child_offsets[s]; e < space.child_offsets[s + 1]; ++e) {
      StateId c = space.child_ids[e];
      std::uint32_t pos = space.parent_offsets[c] + fill[c]++;
      space.parent_ids[pos] = static_cast<StateId>(s);
      space.parent_mult[pos] = space.child_mult[e];
      space.parent_child_slot[pos] = e - space.child_offsets[s];
    }
  }

  space.terminal_index.assign(S, kInvalidState);
  for (std::size_t s = 0; s < S; ++s) {
    if (space.terminable[s]) {
      space.terminal_index[s] = static_cast<std::uint32_t>(space.terminals.size());
      space.terminals.push_back(static_cast<StateId>(s));
    }
  }

  return space;
}

std::string space_to_json(const StateSpace& space, std::size_t max_states) {
  if (space.size() > max_states) {
    throw FlowbenchError("space too large for JSON dump (" + std::to_string(space.size()) +
                         " states)");
  }
  std::ostringstream os;
  os << "{\n  \"env\": \"" << space.config.describe() << "\",\n  \"states\": [\n";
  for (std::size_t s = 0; s < space.size(); ++s) {
    os << "    {\"id\": " << s << ", \"state\": \"" << space.state_text(static_cast<StateId>(s))
       << "\", \"terminable\": " << (space.terminable[s] ? "true" : "false") << ", \"children\": [";
    for (std::uint32_t e = space.child_offsets[s]; e < space.child_offsets[s + 1]; ++e) {
      if (e != space.child_offsets[s]) os << ", ";
      os << "[" << space.child_ids[e] << ", " << space.child_mult[e] << "]";
    }
    os << "]}" << (s + 1 < space.size() ? "," : "") << "\n";
  }
  os << "  ]\n}\n";
  return os.str();
}

bool trajectory_valid(const StateSpace& space, const Trajectory& traj) {
  if (traj.steps.empty()) return false;
  if (traj.steps.front().first != space.root) return false;
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    auto [s, action] = traj.steps[i];
    if (action == Trajectory::kStopAction) {
      if (i + 1 != traj.steps.size()) return false;
      if (!traj.complete) return false;
      if (!space.is_terminable(s)) return false;
      if (traj.terminal != s) return false;
      return true;
    }
    if (action >= space.num_children(s)) return false;
    if (i + 1 >= traj.steps.size()) return !traj.complete;
    StateId next = space.child_ids[space.child_offsets[s] + action];
    if (traj.steps[i + 1].first != next) return false;
  }
  return !traj.complete;
}

}  // namespace flowbench
