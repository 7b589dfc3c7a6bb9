#include "flowlet/primitives.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "flowlet/error.hpp"

namespace flowlet {

namespace {

KeyMode detect_mode(const std::vector<std::string_view>& keys) {
  for (auto k : keys)
    if (!is_numeric_key(k)) return KeyMode::lex;
  return KeyMode::numeric;
}

std::vector<std::string_view> keys_of(const std::vector<std::string_view>& items,
                                      const Format& fmt,
                                      const std::string& identifier) {
  std::vector<std::string_view> keys;
  keys.reserve(items.size());
  for (auto it : items) keys.push_back(fmt.key_field(it, identifier));
  return keys;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

FindRule parse_find_rule(const std::string& name) {
  if (name == "highest_sum") return FindRule::highest_sum;
  if (name == "lowest_sum") return FindRule::lowest_sum;
  raise(Errc::missing_param, "find must be highest_sum or lowest_sum, got '" + name + "'");
}

const char* find_rule_name(FindRule rule) {
  return rule == FindRule::highest_sum ? "highest_sum" : "lowest_sum";
}

size_t RangeSet::index_of(std::string_view key) const {
  KeyLess less{mode};
  // Bucket = last range whose lo is not above the key. Keys below the first
  // range's lo clamp into range 0, so the chain covers the whole key domain.
  size_t lo = 1, hi = ranges.size();
  while (lo < hi) {
    size_t mid = (lo + hi) / 2;
    if (less(key, ranges[mid].lo))
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo - 1;
}

json RangeSet::to_json() const {
  json doc;
  doc["mode"] = mode == KeyMode::numeric ? "numeric" : "lex";
  doc["ranges"] = json::array();
  for (const auto& r : ranges) {
    json jr = json::object();
    if (r.has_lo) jr["lo"] = r.lo;
    if (r.has_hi) jr["hi"] = r.hi;
    doc["ranges"].push_back(jr);
  }
  return doc;
}

RangeSet RangeSet::from_json(const json& doc) {
  RangeSet rs;
  if (!doc.is_object() || !doc.contains("mode") || !doc.contains("ranges"))
    raise(Errc::malformed, "range set document");
  rs.mode = doc["mode"] == "numeric" ? KeyMode::numeric : KeyMode::lex;
  for (const auto& jr : doc["ranges"]) {
    KeyRange r;
    if (jr.contains("lo")) {
      r.has_lo = true;
      r.lo = jr["lo"].get<std::string>();
    }
    if (jr.contains("hi")) {
      r.has_hi = true;
      r.hi = jr["hi"].get<std::string>();
    }
    rs.ranges.push_back(std::move(r));
  }
  if (rs.ranges.empty()) raise(Errc::malformed, "range set has no ranges");
  return rs;
}

std::vector<Chunk> split_blob(std::string_view blob, const Format& fmt,
                              int64_t split_size) {
  if (split_size <= 0) raise(Errc::missing_param, "split_size must be positive");
  std::vector<Chunk> out;
  auto items = fmt.items(blob);
  size_t start = 0, size = 0;
  size_t consumed = 0;
  auto flush = [&](size_t end) {
    Chunk c;
    c.ordinal = static_cast<int64_t>(out.size());
    c.bytes.assign(blob.substr(start, end - start));
    out.push_back(std::move(c));
  };
  for (auto item : items) {
    if (size > 0 && size + item.size() > static_cast<size_t>(split_size)) {
      flush(consumed);
      start = consumed;
      size = 0;
    }
    size += item.size();
    consumed += item.size();
  }
  flush(blob.size());
  for (auto& c : out) c.total = static_cast<int64_t>(out.size());
  return out;
}

std::string combine_chunks(const std::vector<Chunk>& chunks, const Format& fmt,
                           const std::optional<std::string>& identifier) {
  if (chunks.empty()) raise(Errc::no_chunks, "combine of zero chunks");
  int64_t total = chunks[0].total;
  std::vector<const Chunk*> by_ordinal(total, nullptr);
  for (const auto& c : chunks) {
    if (c.total != total || c.ordinal < 0 || c.ordinal >= total)
      raise(Errc::missing_chunk, "inconsistent ordinals in chunk set");
    if (by_ordinal[c.ordinal])
      raise(Errc::missing_chunk, "duplicate ordinal " + std::to_string(c.ordinal));
    by_ordinal[c.ordinal] = &c;
  }
  for (int64_t i = 0; i < total; i++)
    if (!by_ordinal[i]) raise(Errc::missing_chunk, "ordinal " + std::to_string(i));

  if (!identifier) {
    std::string out;
    for (const auto* c : by_ordinal) out += c->bytes;
    return out;
  }

  std::vector<std::string_view> items;
  for (const auto* c : by_ordinal)
    for (auto it : fmt.items(c->bytes)) items.push_back(it);
  auto keys = keys_of(items, fmt, *identifier);
  KeyLess less{detect_mode(keys)};
  std::vector<size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return less(keys[a], keys[b]); });
  std::string out;
  for (size_t i : order) out.append(items[i]);
  return out;
}

std::string top_items(std::string_view blob, const Format& fmt,
                      const std::string& identifier, int64_t number) {
  if (number <= 0) raise(Errc::missing_param, "number must be positive");
  auto items = fmt.items(blob);
  auto keys = keys_of(items, fmt, identifier);
  KeyLess less{detect_mode(keys)};
  std::vector<size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return less(keys[b], keys[a]); });
  if (static_cast<int64_t>(order.size()) > number) order.resize(number);
  std::string out;
  for (size_t i : order) out.append(items[i]);
  return out;
}

const Chunk& match_chunks(const std::vector<Chunk>& chunks, const Format& fmt,
                          const std::string& identifier, FindRule rule) {
  if (chunks.empty()) raise(Errc::no_chunks, "match over zero chunks");
  const Chunk* best = nullptr;
  long double best_sum = 0;
  for (const auto& c : chunks) {
    long double sum = 0;
    for (auto item : fmt.items(c.bytes)) {
      auto key = fmt.key_field(item, identifier);
      auto v = parse_number(key);
      if (!v)
        raise(Errc::format_error,
              "match needs numeric keys, got '" + std::string(key) + "'");
      sum += *v;
    }
    bool better = false;
    if (!best) {
      better = true;
    } else if (sum != best_sum) {
      better = rule == FindRule::highest_sum ? sum > best_sum : sum < best_sum;
    } else {
      better = c.path < best->path;
    }
    if (better) {
      best = &c;
      best_sum = sum;
    }
  }
  return *best;
}

std::vector<MapPair> map_pairs(const std::vector<std::string>& inputs,
                               const std::vector<std::string>& tables) {
  if (inputs.empty()) raise(Errc::no_chunks, "map over zero inputs");
  if (tables.empty()) raise(Errc::empty_map_table, "map table has no entries");
  std::vector<MapPair> out;
  out.reserve(inputs.size() * tables.size());
  for (const auto& in : inputs)
    for (const auto& t : tables) out.push_back({in, t});
  return out;
}

RangeSet partition_keys(std::string_view blob, const Format& fmt,
                        const std::string& identifier, int64_t count,
                        uint64_t seed, int64_t sample_cap) {
  if (count <= 0) raise(Errc::missing_param, "range count must be positive");
  auto items = fmt.items(blob);
  if (items.empty()) raise(Errc::empty_sample, "no items to sample");
  auto keys = keys_of(items, fmt, identifier);

  // Selection sampling: every key subset of the target size is equally
  // likely and the draw order is fixed by the seed.
  std::mt19937_64 rng(seed);
  size_t want = std::min<size_t>(keys.size(), static_cast<size_t>(sample_cap));
  std::vector<std::string_view> sample;
  sample.reserve(want);
  size_t need = want;
  for (size_t i = 0; i < keys.size() && need > 0; i++) {
    size_t left = keys.size() - i;
    if (uniform01(rng) * static_cast<double>(left) < static_cast<double>(need)) {
      sample.push_back(keys[i]);
      need--;
    }
  }

  RangeSet rs;
  rs.mode = detect_mode(sample);
  KeyLess less{rs.mode};
  std::stable_sort(sample.begin(), sample.end(),
                   [&](std::string_view a, std::string_view b) { return less(a, b); });
  size_t s = sample.size();
  std::vector<std::string_view> bounds;
  bounds.push_back(sample.front());
  for (int64_t i = 1; i < count; i++)
    bounds.push_back(sample[static_cast<size_t>(i) * s / static_cast<size_t>(count)]);
  for (int64_t i = 0; i < count; i++) {
    KeyRange r;
    r.has_lo = true;
    r.lo = std::string(bounds[static_cast<size_t>(i)]);
    if (i + 1 < count) {
      r.has_hi = true;
      r.hi = std::string(bounds[static_cast<size_t>(i) + 1]);
    }
    rs.ranges.push_back(std::move(r));
  }
  return rs;
}

std::vector<std::string> scatter_blob(std::string_view blob, const Format& fmt,
                                      const std::string& identifier,
                                      const RangeSet& ranges) {
  std::vector<std::string> out(ranges.ranges.size());
  for (auto item : fmt.items(blob)) {
    auto key = fmt.key_field(item, identifier);
    out[ranges.index_of(key)].append(item);
  }
  return out;
}

std::string sort_items(std::string_view blob, const Format& fmt,
                       const std::string& identifier, KeyMode mode) {
  auto items = fmt.items(blob);
  auto keys = keys_of(items, fmt, identifier);
  KeyLess less{mode};
  std::vector<size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return less(keys[a], keys[b]); });
  std::string out;
  for (size_t i : order) out.append(items[i]);
  return out;
}

std::vector<Chunk> sort_blob(std::string_view blob, const Format& fmt,
                             const std::string& identifier, int64_t split_size,
                             uint64_t seed) {
  if (split_size <= 0) raise(Errc::missing_param, "split_size must be positive");
  int64_t count =
      std::max<int64_t>(1, (static_cast<int64_t>(blob.size()) + split_size - 1) / split_size);
  std::vector<Chunk> out;
  if (blob.empty()) {
    out.push_back(Chunk{});
    return out;
  }
  if (count == 1) {
    auto items = fmt.items(blob);
    auto keys = keys_of(items, fmt, identifier);
    Chunk c;
    c.bytes = sort_items(blob, fmt, identifier, detect_mode(keys));
    out.push_back(std::move(c));
    return out;
  }
  RangeSet rs = partition_keys(blob, fmt, identifier, count, seed);
  auto buckets = scatter_blob(blob, fmt, identifier, rs);
  for (size_t i = 0; i < buckets.size(); i++) {
    Chunk c;
    c.ordinal = static_cast<int64_t>(i);
    c.total = static_cast<int64_t>(buckets.size());
    c.bytes = sort_items(buckets[i], fmt, identifier, rs.mode);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace flowlet
