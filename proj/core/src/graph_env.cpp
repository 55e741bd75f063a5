#include "flowbench/graph_env.hpp"

#include <algorithm>
#include <bit>
#include <map>

namespace flowbench {

namespace {

// Column-major pair enumeration: (0,1),(0,2),(1,2),(0,3),... so that
// placing canonical position k determines a contiguous bit run. The
// canonical key minimizes this serialization.
constexpr int kPairBase[ColoredGraph::kMaxNodes] = {0, 0, 1, 3, 6, 10, 15};

constexpr std::uint8_t kNoAttach = 0xf;

}  // namespace

int pair_bit(int i, int j) {
  if (i > j) std::swap(i, j);
  return kPairBase[j] + i;
}

bool has_edge(const ColoredGraph& g, int i, int j) {
  return (g.adj >> pair_bit(i, j)) & 1u;
}

ColoredGraph with_edge(ColoredGraph g, int i, int j) {
  g.adj |= 1u << pair_bit(i, j);
  return g;
}

int color_of(const ColoredGraph& g, int i) { return (g.colors >> i) & 1; }

int degree(const ColoredGraph& g, int i) {
  int d = 0;
  for (int j = 0; j < g.n; ++j) {
    if (j != i && has_edge(g, i, j)) ++d;
  }
  return d;
}

bool is_connected(const ColoredGraph& g) {
  if (g.n <= 1) return true;
  std::uint8_t seen = 1;
  std::uint8_t frontier = 1;
  while (frontier != 0) {
    std::uint8_t next = 0;
    for (int i = 0; i < g.n; ++i) {
      if (!((frontier >> i) & 1)) continue;
      for (int j = 0; j < g.n; ++j) {
        if (j != i && has_edge(g, i, j)) next |= std::uint8_t(1u << j);
      }
    }
    frontier = next & ~seen;
    seen |= next;
  }
  return seen == (1u << g.n) - 1;
}

std::uint64_t encode_graph(const ColoredGraph& g) {
  return std::uint64_t(g.n) | (std::uint64_t(g.colors) << 4) | (std::uint64_t(g.adj) << 11);
}

ColoredGraph decode_graph(std::uint64_t code) {
  ColoredGraph g;
  g.n = static_cast<std::uint8_t>(code & 0xf);
  g.colors = static_cast<std::uint8_t>((code >> 4) & 0x7f);
  g.adj = static_cast<std::uint32_t>((code >> 11) & 0x1fffff);
  return g;
}

namespace {

// Backtracking search for the minimal serialization. Positions are filled
// left to right; color classes are fixed up front (all reds before all
// greens is the minimal color prefix), and candidate columns are compared
// incrementally against the best-so-far, pruning dominated branches.
struct Canonicalizer {
  const ColoredGraph& g;
  int n;
  int reds;
  std::uint32_t best_cols[ColoredGraph::kMaxNodes + 1];
  int perm[ColoredGraph::kMaxNodes + 1];
  bool used[ColoredGraph::kMaxNodes + 1] = {};

  static constexpr std::uint32_t kUnset = 0xffffffffu;

  explicit Canonicalizer(const ColoredGraph& graph) : g(graph), n(graph.n) {
    reds = 0;
    for (int i = 0; i < n; ++i) {
      if (color_of(g, i) == 0) ++reds;
    }
    for (int k = 0; k < n; ++k) best_cols[k] = kUnset;
  }

  // Bits (perm[0],v),...,(perm[k-1],v), earliest position most significant.
  std::uint32_t column(int k, int v) const {
    std::uint32_t col = 0;
    for (int i = 0; i < k; ++i) {
      col = (col << 1) | (has_edge(g, perm[i], v) ? 1u : 0u);
    }
    return col;
  }

  void search(int k) {
    if (k >= n || k >= ColoredGraph::kMaxNodes) return;
    int want = k < reds ? 0 : 1;
    for (int v = 0; v < n; ++v) {
      if (used[v] || color_of(g, v) != want) continue;
      std::uint32_t col = column(k, v);
      if (col > best_cols[k]) continue;
      if (col < best_cols[k]) {
        best_cols[k] = col;
        for (int t = k + 1; t < n; ++t) best_cols[t] = kUnset;
      }
      used[v] = true;
      perm[k] = v;
      search(k + 1);
      used[v] = false;
    }
  }

  ColoredGraph result() const {
    ColoredGraph c;
    c.n = static_cast<std::uint8_t>(n);
    for (int i = reds; i < n; ++i) c.colors |= std::uint8_t(1u << i);
    for (int k = 1; k < n; ++k) {
      for (int i = 0; i < k; ++i) {
        if ((best_cols[k] >> (k - 1 - i)) & 1u) c.adj |= 1u << pair_bit(i, k);
      }
    }
    return c;
  }
};

}  // namespace

std::uint64_t canonical_key(const ColoredGraph& g) {
  if (g.n <= 1) {
    return encode_graph(g);
  }
  Canonicalizer canon(g);
  canon.search(0);
  return encode_graph(canon.result());
}

std::uint16_t GraphAction::pack() const {
  return static_cast<std::uint16_t>((static_cast<std::uint16_t>(kind) << 8) |
                                    (std::uint16_t(a & 0xf) << 4) | std::uint16_t(b & 0xf));
}

GraphAction GraphAction::unpack(std::uint16_t code) {
  GraphAction act;
  act.kind = static_cast<Kind>((code >> 8) & 0xff);
  act.a = (code >> 4) & 0xf;
  act.b = code & 0xf;
  if (act.a == kNoAttach) act.a = 0xff;
  return act;
}

namespace {

ColoredGraph add_node(const ColoredGraph& g, int attach, int color) {
  ColoredGraph h = g;
  int v = h.n++;
  if (color) h.colors |= std::uint8_t(1u << v);
  if (attach >= 0) h = with_edge(h, attach, v);
  return h;
}

ColoredGraph remove_node(const ColoredGraph& g, int w) {
  ColoredGraph h;
  h.n = static_cast<std::uint8_t>(g.n - 1);
  for (int i = 0, ni = 0; i < g.n; ++i) {
    if (i == w) continue;
    if (color_of(g, i)) h.colors |= std::uint8_t(1u << ni);
    for (int j = i + 1, nj = ni + 1; j < g.n; ++j) {
      if (j == w) continue;
      if (has_edge(g, i, j)) h = with_edge(h, ni, nj);
      ++nj;
    }
    ++ni;
  }
  return h;
}

}  // namespace

std::vector<GraphChild> graph_children(const ColoredGraph& g, const GraphGrammar& grammar) {
  std::map<std::uint64_t, GraphChild> dedup;
  auto record = [&](std::uint64_t key, GraphAction act) {
    auto& entry = dedup[key];
    entry.key = key;
    entry.multiplicity += 1;
    entry.actions.push_back(act);
  };

  if (g.n == 0) {
    for (std::uint8_t c = 0; c < 2; ++c) {
      ColoredGraph child = add_node(g, -1, c);
      record(canonical_key(child),
             {GraphAction::Kind::add_node, 0xff, c});
    }
  } else {
    if (g.n < grammar.max_nodes) {
      for (std::uint8_t u = 0; u < g.n; ++u) {
        for (std::uint8_t c = 0; c < 2; ++c) {
          ColoredGraph child = add_node(g, u, c);
          record(canonical_key(child), {GraphAction::Kind::add_node, u, c});
        }
      }
      if (grammar.allow_disconnected) {
        for (std::uint8_t c = 0; c < 2; ++c) {
          ColoredGraph child = add_node(g, -1, c);
          record(canonical_key(child), {GraphAction::Kind::add_node, 0xff, c});
        }
      }
    }
    for (std::uint8_t u = 0; u < g.n; ++u) {
      for (std::uint8_t v = u + 1; v < g.n; ++v) {
        if (has_edge(g, u, v)) continue;
        ColoredGraph child = with_edge(g, u, v);
        record(canonical_key(child), {GraphAction::Kind::add_edge, u, v});
      }
    }
  }

  std::vector<GraphChild> out;
  out.reserve(dedup.size());
  for (auto& [key, child] : dedup) out.push_back(std::move(child));
  return out;
}

std::vector<GraphParent> graph_parents(const ColoredGraph& g, const GraphGrammar& grammar) {
  std::map<std::uint64_t, std::uint32_t> dedup;
  if (g.n == 0) return {};
  if (g.n == 1) {
    dedup[encode_graph(ColoredGraph{})] += 1;
  } else {
    for (int u = 0; u < g.n; ++u) {
      for (int v = u + 1; v < g.n; ++v) {
        if (!has_edge(g, u, v)) continue;
        ColoredGraph h = g;
        h.adj &= ~(1u << pair_bit(u, v));
        if (grammar.allow_disconnected || is_connected(h)) {
          dedup[canonical_key(h)] += 1;
        }
      }
    }
    for (int w = 0; w < g.n; ++w) {
      int d = degree(g, w);
      bool removable = grammar.allow_disconnected ? d <= 1 : d == 1;
      if (removable) dedup[canonical_key(remove_node(g, w))] += 1;
    }
  }

  std::vector<GraphParent> out;
  out.reserve(dedup.size());
  for (auto [key, mult] : dedup) out.push_back({key, mult});
  return out;
}

bool graph_terminable(const ColoredGraph& g) { return g.n >= 1; }

std::string graph_to_text(const ColoredGraph& g) {
  std::string s = "n=" + std::to_string(g.n) + ";colors=";
  for (int i = 0; i < g.n; ++i) s += color_of(g, i) ? 'G' : 'R';
  s += ";edges=";
  bool first = true;
  for (int i = 0; i < g.n; ++i) {
    for (int j = i + 1; j < g.n; ++j) {
      if (!has_edge(g, i, j)) continue;
      if (!first) s += ',';
      s += std::to_string(i) + "-" + std::to_string(j);
      first = false;
    }
  }
  return s;
}

}  // namespace flowbench
