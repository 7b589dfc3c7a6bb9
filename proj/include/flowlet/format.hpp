#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace flowlet {

// A blob decomposes into items (newline-terminated records for the built-in
// formats; concatenating the items reproduces the blob byte for byte). A
// format also knows how to pull a sort key out of an item given an
// identifier string.
class Format {
 public:
  virtual ~Format() = default;
  virtual const std::string& name() const = 0;
  virtual std::vector<std::string_view> items(std::string_view blob) const = 0;
  virtual std::string_view key_field(std::string_view item,
                                     const std::string& identifier) const = 0;
};

// Newline-terminated records, whitespace-separated fields. Identifier "" or
// "line" keys on the whole record; a decimal identifier selects that field.
class NewlineFormat : public Format {
 public:
  const std::string& name() const override;
  std::vector<std::string_view> items(std::string_view blob) const override;
  std::string_view key_field(std::string_view item,
                             const std::string& identifier) const override;
};

// Newline-terminated records, tab-separated columns, identifier is a column
// index.
class TsvFormat : public Format {
 public:
  const std::string& name() const override;
  std::vector<std::string_view> items(std::string_view blob) const override;
  std::string_view key_field(std::string_view item,
                             const std::string& identifier) const override;
};

class FormatRegistry {
 public:
  FormatRegistry();  // registers new_line and tsv
  void add(std::shared_ptr<const Format> fmt);
  const Format& get(const std::string& name) const;  // FormatError if unknown
  bool has(const std::string& name) const;

 private:
  std::map<std::string, std::shared_ptr<const Format>> formats_;
};

// Keys compare numerically when every key in sight parses as a decimal
// number, lexicographically (bytewise) otherwise. The mode is detected once
// per operation and then applied uniformly.
enum class KeyMode { numeric, lex };

std::optional<double> parse_number(std::string_view text);
bool is_numeric_key(std::string_view key);

struct KeyLess {
  KeyMode mode = KeyMode::lex;
  bool operator()(std::string_view a, std::string_view b) const;
};

// Strips one trailing record terminator so extracted fields never carry it.
std::string_view strip_newline(std::string_view item);

}  // namespace flowlet
