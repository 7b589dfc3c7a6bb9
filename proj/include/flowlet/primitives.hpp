#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowlet/format.hpp"

namespace flowlet {

using json = nlohmann::json;

inline constexpr int64_t kDefaultSplitSize = 1'000'000;

struct Chunk {
  std::string path;
  int64_t ordinal = 0;
  int64_t total = 1;
  std::string bytes;
};

// Half-open key interval. Unbounded ends are expressed by the has_ flags;
// empty intervals (lo == hi) are legal and simply match nothing.
struct KeyRange {
  bool has_lo = false;
  bool has_hi = false;
  std::string lo;
  std::string hi;
};

// Contiguous chain of ranges produced by partitioning. Bucketing uses the
// interior boundaries only, so keys below the observed minimum still land in
// the first range.
struct RangeSet {
  KeyMode mode = KeyMode::lex;
  std::vector<KeyRange> ranges;

  size_t index_of(std::string_view key) const;
  json to_json() const;
  static RangeSet from_json(const json& doc);
};

enum class FindRule { highest_sum, lowest_sum };
FindRule parse_find_rule(const std::string& name);
const char* find_rule_name(FindRule rule);

// Cuts a blob into record-aligned chunks of at most split_size bytes (an
// oversized single record gets its own chunk). An empty blob yields one
// empty chunk.
std::vector<Chunk> split_blob(std::string_view blob, const Format& fmt,
                              int64_t split_size);

// Reassembles chunks in ordinal order. With an identifier the items are
// instead merged into one key-ordered blob (stable in chunk-major input
// order for equal keys).
std::string combine_chunks(const std::vector<Chunk>& chunks, const Format& fmt,
                           const std::optional<std::string>& identifier);

// The number highest-keyed items, highest first; equal keys keep their
// original relative order.
std::string top_items(std::string_view blob, const Format& fmt,
                      const std::string& identifier, int64_t number);

// The chunk whose key sum is extremal under the rule; ties pick the
// lexicographically smallest path.
const Chunk& match_chunks(const std::vector<Chunk>& chunks, const Format& fmt,
                          const std::string& identifier, FindRule rule);

struct MapPair {
  std::string input;
  std::string table;
};

// Cross product, input-major order.
std::vector<MapPair> map_pairs(const std::vector<std::string>& inputs,
                               const std::vector<std::string>& tables);

// Builds count contiguous ranges from a seeded sample of at most sample_cap
// keys; boundaries sit at the evenly spaced order statistics of the sample.
RangeSet partition_keys(std::string_view blob, const Format& fmt,
                        const std::string& identifier, int64_t count,
                        uint64_t seed, int64_t sample_cap = 10000);

// One output blob per range, items in input order.
std::vector<std::string> scatter_blob(std::string_view blob, const Format& fmt,
                                      const std::string& identifier,
                                      const RangeSet& ranges);

// Stable sort of one blob's items under the given comparison mode.
std::string sort_items(std::string_view blob, const Format& fmt,
                       const std::string& identifier, KeyMode mode);

// Full sort: partition, scatter, per-range stable sort. Output chunk i holds
// exactly the items of range i, so concatenation is globally ordered.
std::vector<Chunk> sort_blob(std::string_view blob, const Format& fmt,
                             const std::string& identifier, int64_t split_size,
                             uint64_t seed);

}  // namespace flowlet
