#include "flowbench/simple_envs.hpp"

#include <algorithm>
#include <array>

namespace flowbench {

std::uint64_t encode_cell(const GridCell& c) {
  return std::uint64_t(std::uint32_t(c.x)) | (std::uint64_t(std::uint32_t(c.y)) << 16);
}

GridCell decode_cell(std::uint64_t code) {
  return {static_cast<int>(code & 0xffff), static_cast<int>((code >> 16) & 0xffff)};
}

namespace {

bool grid_forced_stop(const GridCell& c, const GridConfig& cfg) {
  return cfg.boundary_forced_stop && (c.x == cfg.size - 1 || c.y == cfg.size - 1);
}

}  // namespace

std::vector<GridCell> grid_children(const GridCell& c, const GridConfig& cfg) {
  std::vector<GridCell> out;
  if (grid_forced_stop(c, cfg)) return out;
  if (c.x < cfg.size - 1) out.push_back({c.x + 1, c.y});
  if (c.y < cfg.size - 1) out.push_back({c.x, c.y + 1});
  return out;
}

std::vector<GridCell> grid_parents(const GridCell& c, const GridConfig& cfg) {
  std::vector<GridCell> out;
  for (GridCell p : {GridCell{c.x - 1, c.y}, GridCell{c.x, c.y - 1}}) {
    if (p.x < 0 || p.y < 0) continue;
    for (const GridCell& q : grid_children(p, cfg)) {
      if (q.x == c.x && q.y == c.y) out.push_back(p);
    }
  }
  return out;
}

bool grid_terminable(const GridCell&, const GridConfig&) { return true; }

std::uint64_t encode_bitstring(const BitString& b) {
  return std::uint64_t(b.length) | (std::uint64_t(b.bits) << 8);
}

BitString decode_bitstring(std::uint64_t code) {
  BitString b;
  b.length = static_cast<std::uint8_t>(code & 0xff);
  b.bits = static_cast<std::uint16_t>((code >> 8) & 0xffff);
  return b;
}

BitString append_bit(const BitString& b, int bit) {
  BitString out = b;
  if (bit) out.bits |= std::uint16_t(1u << b.length);
  out.length += 1;
  return out;
}

std::string bitstring_to_text(const BitString& b) {
  std::string s;
  for (int i = 0; i < b.length; ++i) s += ((b.bits >> i) & 1) ? '1' : '0';
  return s;
}

BitString bitstring_from_text(const std::string& text) {
  BitString b;
  for (char ch : text) b = append_bit(b, ch == '1' ? 1 : 0);
  return b;
}

std::vector<BitString> seq_children(const BitString& b, const SequenceConfig& cfg) {
  std::vector<BitString> out;
  if (b.length < cfg.max_len) {
    out.push_back(append_bit(b, 0));
    out.push_back(append_bit(b, 1));
  }
  return out;
}

bool seq_terminable(const BitString& b) { return b.length >= 1; }

int edit_distance(const BitString& a, const BitString& b) {
  int m = a.length;
  int n = b.length;
  std::array<int, 17> row{};
  for (int j = 0; j <= n; ++j) row[j] = j;
  for (int i = 1; i <= m; ++i) {
    int prev = row[0];
    row[0] = i;
    int ai = (a.bits >> (i - 1)) & 1;
    for (int j = 1; j <= n; ++j) {
      int bj = (b.bits >> (j - 1)) & 1;
      int cur = row[j];
      int subst = prev + (ai != bj ? 1 : 0);
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, subst});
      prev = cur;
    }
  }
  return row[n];
}

ModeSet sample_modes(const SequenceConfig& cfg, std::uint64_t seed, int count) {
  // Terminable strings indexed as: length-k block occupies
  // [2^k - 2, 2^(k+1) - 2), bits ascending within a block.
  std::uint64_t total = (std::uint64_t(1) << (cfg.max_len + 1)) - 2;
  Rng rng(derive_seed(seed, "modes"));
  ModeSet set;
  set.seed = seed;
  for (std::uint64_t idx : rng.sample_without_replacement(total, std::uint64_t(count))) {
    std::uint64_t v = idx + 2;
    int length = 0;
    while ((std::uint64_t(1) << (length + 1)) <= v) ++length;
    BitString b;
    b.length = static_cast<std::uint8_t>(length);
    b.bits = static_cast<std::uint16_t>(v - (std::uint64_t(1) << length));
    set.modes.push_back(b);
  }
  return set;
}

}  // namespace flowbench
