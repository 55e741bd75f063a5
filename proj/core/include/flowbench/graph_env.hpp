#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "flowbench/common.hpp"

namespace flowbench {

/// Vertex-2-colored simple graph on at most 7 nodes. The adjacency lives in
/// a 21-bit upper-triangle mask, colors in a 7-bit mask (bit set = green).
/// Connected whenever n >= 1 under the default grammar.
struct ColoredGraph {
  std::uint8_t n = 0;
  std::uint32_t adj = 0;     // bit pair_bit(i,j) set iff edge {i,j}
  std::uint8_t colors = 0;   // bit i set iff node i is green (color 1)

  static constexpr int kMaxNodes = 7;

  bool operator==(const ColoredGraph&) const = default;
};

/// Bit position of the unordered pair {i, j}, i != j, within the
/// upper-triangle enumeration (0,1),(0,2),...,(0,6),(1,2),...,(5,6).
int pair_bit(int i, int j);

bool has_edge(const ColoredGraph& g, int i, int j);
ColoredGraph with_edge(ColoredGraph g, int i, int j);
int color_of(const ColoredGraph& g, int i);  // 0 = red, 1 = green
int degree(const ColoredGraph& g, int i);
bool is_connected(const ColoredGraph& g);

/// Packs (n, colors, adj) into one 64-bit word; the packing of the
/// canonical form is the CanonicalKey used throughout the state space.
std::uint64_t encode_graph(const ColoredGraph& g);
ColoredGraph decode_graph(std::uint64_t code);

/// Lexicographically minimal (colors, adjacency) encoding over all vertex
/// relabelings; colors are carried along with vertices, never exchanged.
/// Equal for isomorphic colored graphs, distinct otherwise.
std::uint64_t canonical_key(const ColoredGraph& g);

/// Constructive actions. AddNode attaches a fresh node of `color` to
/// existing node `node` by one edge (no attachment at the empty root).
struct GraphAction {
  enum class Kind : std::uint8_t { add_node = 0, add_edge = 1 };
  Kind kind;
  std::uint8_t a;  // add_node: attach target (0xff at the root); add_edge: u
  std::uint8_t b;  // add_node: color; add_edge: v

  std::uint16_t pack() const;
  static GraphAction unpack(std::uint16_t code);
  bool operator==(const GraphAction&) const = default;
};

struct GraphChild {
  std::uint64_t key;                  // canonical key of the child
  std::uint32_t multiplicity;         // concrete actions collapsing here
  std::vector<GraphAction> actions;   // those concrete actions, scan order
};

struct GraphParent {
  std::uint64_t key;
  std::uint32_t multiplicity;  // concrete undo operations
};

struct GraphGrammar {
  int max_nodes = 7;
  /// Allows AddNode without attachment (disconnected intermediates).
  /// Provided for reconciling state counts; off by default.
  bool allow_disconnected = false;
  /// Whether the empty root participates in the reported state count.
  /// The 72,296 figure counts the constructed graphs only.
  bool count_empty_root = false;
};

/// Canonically deduplicated children of g, sorted by canonical key.
/// g must itself be in canonical form.
std::vector<GraphChild> graph_children(const ColoredGraph& g, const GraphGrammar& grammar);

/// Canonically deduplicated parents (undo one AddEdge keeping the remainder
/// connected, or undo one AddNode by removing a degree-1 node), sorted by
/// canonical key. Multiplicity counts concrete undo operations.
std::vector<GraphParent> graph_parents(const ColoredGraph& g, const GraphGrammar& grammar);

bool graph_terminable(const ColoredGraph& g);

/// Debug form "n=K;colors=RGRG...;edges=u-v,u-v,..." in canonical order.
std::string graph_to_text(const ColoredGraph& g);

}  // namespace flowbench
