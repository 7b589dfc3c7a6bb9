#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "flowlet/error.hpp"
#include "flowlet/format.hpp"

using namespace flowlet;

namespace {

std::string random_blob(std::mt19937_64& rng, bool trailing_newline) {
  static const char chars[] = "abc xyz\t0123456789";
  int records = static_cast<int>(rng() % 20);
  std::string out;
  for (int i = 0; i < records; i++) {
    int len = static_cast<int>(rng() % 12);
    for (int j = 0; j < len; j++) out += chars[rng() % (sizeof(chars) - 1)];
    out += '\n';
  }
  if (!trailing_newline && !out.empty()) out.pop_back();
  return out;
}

}  // namespace

TEST_CASE("newline items reassemble the blob byte for byte") {
  NewlineFormat fmt;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; i++) {
    std::string blob = random_blob(rng, i % 2 == 0);
    auto items = fmt.items(blob);
    std::string back;
    for (auto it : items) back += std::string(it);
    CHECK(back == blob);
    for (size_t k = 0; k + 1 < items.size(); k++) {
      REQUIRE(!items[k].empty());
      CHECK(items[k].back() == '\n');
    }
  }
  CHECK(fmt.items("").empty());
  CHECK(fmt.items("\n").size() == 1);
  CHECK(fmt.items("x").size() == 1);
}

TEST_CASE("newline key extraction by field index") {
  NewlineFormat fmt;
  CHECK(fmt.key_field("alpha beta gamma\n", "0") == "alpha");
  CHECK(fmt.key_field("alpha beta gamma\n", "1") == "beta");
  CHECK(fmt.key_field("alpha beta gamma\n", "2") == "gamma");
  CHECK(fmt.key_field("  alpha   beta\n", "0") == "alpha");
  CHECK(fmt.key_field("a\tb c\n", "1") == "b");
  CHECK(fmt.key_field("whole line\n", "") == "whole line");
  CHECK(fmt.key_field("whole line\n", "line") == "whole line");
  CHECK_THROWS_AS(fmt.key_field("one two\n", "5"), Error);
  CHECK_THROWS_AS(fmt.key_field("x\n", "name"), Error);
}

TEST_CASE("tsv key extraction by column index") {
  TsvFormat fmt;
  CHECK(fmt.key_field("a\tb\tc\n", "0") == "a");
  CHECK(fmt.key_field("a\tb\tc\n", "2") == "c");
  CHECK(fmt.key_field("a\t\tc\n", "1") == "");
  CHECK(fmt.key_field("only\n", "0") == "only");
  CHECK_THROWS_AS(fmt.key_field("a\tb\n", "2"), Error);
  CHECK_THROWS_AS(fmt.key_field("a\tb\n", "first"), Error);
}

TEST_CASE("registry serves built-ins and rejects unknowns") {
  FormatRegistry reg;
  CHECK(reg.has("new_line"));
  CHECK(reg.has("tsv"));
  CHECK(reg.get("new_line").name() == "new_line");
  CHECK_FALSE(reg.has("parquet"));
  try {
    reg.get("parquet");
    FAIL("unknown format accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::format_error);
  }
}

TEST_CASE("number parsing accepts exactly full numeric tokens") {
  CHECK(parse_number("12").value() == 12);
  CHECK(parse_number("-3.5").value() == -3.5);
  CHECK(parse_number(" 42\t").value() == 42);
  CHECK(parse_number("1e3").value() == 1000);
  CHECK_FALSE(parse_number("abc").has_value());
  CHECK_FALSE(parse_number("12x").has_value());
  CHECK_FALSE(parse_number("").has_value());
  CHECK_FALSE(parse_number("  ").has_value());
  CHECK(is_numeric_key("0.125"));
  CHECK_FALSE(is_numeric_key("0.125f"));
}

TEST_CASE("key ordering switches between numeric and bytewise") {
  KeyLess num{KeyMode::numeric};
  KeyLess lex{KeyMode::lex};
  CHECK(num("2", "10"));
  CHECK_FALSE(num("10", "2"));
  CHECK(lex("10", "2"));
  SUBCASE("equal numeric values are unordered so stable sorts keep input order") {
    CHECK_FALSE(num("1.0", "1"));
    CHECK_FALSE(num("1", "1.0"));
  }
  SUBCASE("non-numeric keys under numeric mode are an error") {
    CHECK_THROWS_AS(num("a", "1"), Error);
  }
}

TEST_CASE("strip_newline removes one record terminator") {
  CHECK(strip_newline("x\n") == "x");
  CHECK(strip_newline("x\r\n") == "x");
  CHECK(strip_newline("x") == "x");
  CHECK(strip_newline("\n") == "");
  CHECK(strip_newline("") == "");
}
