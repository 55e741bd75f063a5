#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowbench/common.hpp"
#include "flowbench/rng.hpp"

namespace flowbench {

/// Cell of the M x M grid. Actions: move x+, move y+, or stop.
struct GridCell {
  int x = 0;
  int y = 0;
};

struct GridConfig {
  int size = 64;  // M
  /// Paper-literal rule: a cell with any coordinate at M-1 has no moves.
  /// That rule makes the corner (M-1, M-1) unreachable, so the shipped
  /// default keeps boundary moves legal and only masks out-of-range ones,
  /// which yields the full M*M state space.
  bool boundary_forced_stop = false;
};

std::uint64_t encode_cell(const GridCell& c);
GridCell decode_cell(std::uint64_t code);

/// Children in a fixed order (x+ first, then y+); multiplicity is always 1.
std::vector<GridCell> grid_children(const GridCell& c, const GridConfig& cfg);
std::vector<GridCell> grid_parents(const GridCell& c, const GridConfig& cfg);
bool grid_terminable(const GridCell& c, const GridConfig& cfg);

/// Bit string of length 0..max_len, built by appending symbols.
struct BitString {
  std::uint8_t length = 0;
  std::uint16_t bits = 0;  // bit i = symbol at position i

  bool operator==(const BitString&) const = default;
};

struct SequenceConfig {
  int max_len = 15;
};

std::uint64_t encode_bitstring(const BitString& b);
BitString decode_bitstring(std::uint64_t code);
BitString append_bit(const BitString& b, int bit);
std::string bitstring_to_text(const BitString& b);
BitString bitstring_from_text(const std::string& text);

std::vector<BitString> seq_children(const BitString& b, const SequenceConfig& cfg);
bool seq_terminable(const BitString& b);

/// Unit-cost Levenshtein distance (insert / delete / substitute).
int edit_distance(const BitString& a, const BitString& b);

/// The 60 mode sequences of the edit-distance task, drawn once per run
/// uniformly without replacement from the terminable strings.
struct ModeSet {
  std::vector<BitString> modes;
  std::uint64_t seed = 0;
};

ModeSet sample_modes(const SequenceConfig& cfg, std::uint64_t seed, int count = 60);

}  // namespace flowbench
