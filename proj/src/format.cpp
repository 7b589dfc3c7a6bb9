#include "flowlet/format.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "flowlet/error.hpp"

namespace flowlet {

namespace {

std::vector<std::string_view> split_records(std::string_view blob) {
  std::vector<std::string_view> out;
  size_t pos = 0;
  while (pos < blob.size()) {
    size_t nl = blob.find('\n', pos);
    if (nl == std::string_view::npos) {
      out.push_back(blob.substr(pos));
      break;
    }
    out.push_back(blob.substr(pos, nl - pos + 1));
    pos = nl + 1;
  }
  return out;
}

bool is_index(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isdigit(c); });
}

size_t parse_index(const std::string& s) {
  size_t v = 0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

std::string_view field_split(std::string_view line, size_t index, char sep,
                             bool any_ws, const std::string& identifier) {
  size_t seen = 0;
  size_t pos = 0;
  auto is_sep = [&](char c) {
    if (any_ws) return c == ' ' || c == '\t';
    return c == sep;
  };
  while (pos <= line.size()) {
    if (any_ws) {
      while (pos < line.size() && is_sep(line[pos])) pos++;
      if (pos >= line.size()) break;
    }
    size_t end = pos;
    while (end < line.size() && !is_sep(line[end])) end++;
    if (seen == index) return line.substr(pos, end - pos);
    seen++;
    pos = any_ws ? end : end + 1;
    if (!any_ws && end == line.size()) break;
  }
  raise(Errc::format_error,
        "no field " + identifier + " in record '" + std::string(line) + "'");
}

}  // namespace

std::string_view strip_newline(std::string_view item) {
  if (!item.empty() && item.back() == '\n') item.remove_suffix(1);
  if (!item.empty() && item.back() == '\r') item.remove_suffix(1);
  return item;
}

const std::string& NewlineFormat::name() const {
  static const std::string n = "new_line";
  return n;
}

std::vector<std::string_view> NewlineFormat::items(std::string_view blob) const {
  return split_records(blob);
}

std::string_view NewlineFormat::key_field(std::string_view item,
                                          const std::string& identifier) const {
  std::string_view line = strip_newline(item);
  if (identifier.empty() || identifier == "line") return line;
  if (is_index(identifier))
    return field_split(line, parse_index(identifier), ' ', true, identifier);
  raise(Errc::format_error,
        "new_line keys by whole line or field index, got '" + identifier + "'");
}

const std::string& TsvFormat::name() const {
  static const std::string n = "tsv";
  return n;
}

std::vector<std::string_view> TsvFormat::items(std::string_view blob) const {
  return split_records(blob);
}

std::string_view TsvFormat::key_field(std::string_view item,
                                      const std::string& identifier) const {
  std::string_view line = strip_newline(item);
  if (identifier.empty() || identifier == "line") return line;
  if (is_index(identifier))
    return field_split(line, parse_index(identifier), '\t', false, identifier);
  raise(Errc::format_error, "tsv keys by column index, got '" + identifier + "'");
}

FormatRegistry::FormatRegistry() {
  add(std::make_shared<NewlineFormat>());
  add(std::make_shared<TsvFormat>());
}

void FormatRegistry::add(std::shared_ptr<const Format> fmt) {
  formats_[fmt->name()] = std::move(fmt);
}

const Format& FormatRegistry::get(const std::string& name) const {
  auto it = formats_.find(name);
  if (it == formats_.end()) raise(Errc::format_error, "unknown format '" + name + "'");
  return *it->second;
}

bool FormatRegistry::has(const std::string& name) const {
  return formats_.count(name) != 0;
}

std::optional<double> parse_number(std::string_view text) {
  size_t a = 0, b = text.size();
  while (a < b && (text[a] == ' ' || text[a] == '\t')) a++;
  while (b > a && (text[b - 1] == ' ' || text[b - 1] == '\t')) b--;
  if (a == b) return std::nullopt;
  double value = 0;
  auto res = std::from_chars(text.data() + a, text.data() + b, value);
  if (res.ec != std::errc() || res.ptr != text.data() + b) return std::nullopt;
  return value;
}

bool is_numeric_key(std::string_view key) { return parse_number(key).has_value(); }

bool KeyLess::operator()(std::string_view a, std::string_view b) const {
  if (mode == KeyMode::lex) return a < b;
  auto na = parse_number(a);
  auto nb = parse_number(b);
  if (!na || !nb)
    raise(Errc::format_error, "non-numeric key under numeric comparison");
  return *na < *nb;  // equal values compare equal so stable sorts keep order
}

}  // namespace flowlet
