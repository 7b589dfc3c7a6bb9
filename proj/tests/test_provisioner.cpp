#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "flowlet/error.hpp"
#include "flowlet/provisioner.hpp"

using namespace flowlet;

TEST_CASE("row keys bucket input sizes by power of two") {
  CHECK(Provisioner::row_key("p", 1) == "p#b0");
  CHECK(Provisioner::row_key("p", 2) == "p#b1");
  CHECK(Provisioner::row_key("p", 3) == "p#b1");
  CHECK(Provisioner::row_key("p", 1024) == "p#b10");
  CHECK(Provisioner::row_key("p", 1'000'000) == "p#b19");
  CHECK(Provisioner::row_key("p", 1'048'576) == "p#b20");
  // Same bucket, same row: one profile covers nearby input sizes.
  CHECK(Provisioner::row_key("p", 700'000) == Provisioner::row_key("p", 900'000));
}

TEST_CASE("the split grid doubles around the default and respects its bounds") {
  auto grid = Provisioner::split_grid(4'000'000, 1000);
  CHECK(grid == std::vector<int64_t>{4000, 7812, 15625, 31250, 62500, 125000,
                                     250000, 500000, 1'000'000, 2'000'000,
                                     4'000'000});

  SUBCASE("wide ranges are thinned to the cap with endpoints kept") {
    auto wide = Provisioner::split_grid(1000, 1000);
    CHECK(wide.size() == 12);
    CHECK(wide.front() == 1);  // ceil(1000/1000)
    CHECK(wide.back() == 1'000'000);
    CHECK(std::count(wide.begin(), wide.end(), 1'000'000) == 1);
    for (size_t i = 1; i < wide.size(); i++) CHECK(wide[i - 1] < wide[i]);
  }
  SUBCASE("every point allows at most concurrency-many tasks") {
    for (int64_t bytes : {1000, 50'000'000, 123'456'789}) {
      auto g = Provisioner::split_grid(bytes, 1000);
      CHECK(g.size() <= 12);
      for (auto v : g) CHECK((bytes + v - 1) / v <= 1000);
    }
  }
}

TEST_CASE("column ids name the split choice per open stage") {
  CHECK(Provisioner::column_for({500}).id == "c500");
  CHECK(Provisioner::column_for({500, 2000}).id == "c500x2000");
  CHECK(Provisioner::task_count(Provisioner::column_for({300}), 1000) == 4);
  CHECK(Provisioner::task_count(Provisioner::column_for({300, 500}), 1000) ==
        4 + 2);
}

TEST_CASE("single-phase grids probe the endpoints as canaries") {
  auto cols = Provisioner::column_grid(1, 4'000'000, 1000);
  REQUIRE(!cols.empty());
  for (const auto& c : cols) REQUIRE(c.splits.size() == 1);
  auto canaries = Provisioner::canary_columns(cols);
  REQUIRE(canaries.size() == 2);
  CHECK(canaries[0].splits[0] == 4000);       // max concurrency endpoint
  CHECK(canaries[1].splits[0] == 1'000'000);  // the default anchor
}

TEST_CASE("multi-phase grids mix uniform and alternating columns") {
  auto cols = Provisioner::column_grid(2, 4'000'000, 1000);
  CHECK(cols.size() <= 12);
  std::set<std::string> ids;
  for (const auto& c : cols) {
    REQUIRE(c.splits.size() == 2);
    CHECK(ids.insert(c.id).second);  // unique
  }
  bool mixed = false;
  for (const auto& c : cols) mixed = mixed || c.splits[0] != c.splits[1];
  CHECK(mixed);

  auto canaries = Provisioner::canary_columns(cols);
  REQUIRE(canaries.size() == 4);
  CHECK(canaries[0].splits[0] == canaries[0].splits[1]);  // all-lo corner
  CHECK(canaries[1].splits[0] == canaries[1].splits[1]);  // all-hi corner
  CHECK(canaries[0].splits[0] < canaries[1].splits[0]);
  CHECK(canaries[2].splits[0] != canaries[2].splits[1]);  // alternating
}

TEST_CASE("canary inputs are capped and scale linearly") {
  CHECK(Provisioner::canary_bytes(5'000'000) == 5'000'000);
  CHECK(Provisioner::canary_bytes(100'000'000) == 20'000'000);
  CHECK(Provisioner::scale_runtime(2.0, 10'000'000, 40'000'000) ==
        doctest::Approx(8.0));
  CHECK(Provisioner::scale_runtime(2.0, 40'000'000, 40'000'000) ==
        doctest::Approx(2.0));
}

TEST_CASE("profile cells record observations and keep the latest") {
  ProfileTable t;
  t.record("r1", "c1", 5.0);
  CHECK(t.is_observed("r1", "c1"));
  CHECK(*t.lookup("r1", "c1") == doctest::Approx(5.0));
  t.record("r1", "c1", 7.5);
  CHECK(*t.lookup("r1", "c1") == doctest::Approx(7.5));
  CHECK(t.observed_count() == 1);
  CHECK_THROWS_AS(t.record("r1", "c1", 0.0), Error);
  CHECK_THROWS_AS(t.record("r1", "c1", -2.0), Error);
  CHECK_FALSE(t.lookup("r1", "c9").has_value());
  t.ensure_row("r2");
  t.ensure_column("c2");
  CHECK_FALSE(t.is_observed("r2", "c2"));
}

TEST_CASE("completion reproduces a product-structured table") {
  // runtime(r, c) = R_r * C_c is additive in log space, which the biased
  // factorization captures; a spanning set of observations pins it down.
  std::vector<double> R = {1.0, 2.0, 4.0, 8.0};
  std::vector<double> C = {1.0, 0.5, 0.25, 0.125};
  ProfileTable t;
  for (size_t i = 0; i < 4; i++) {
    t.record("r" + std::to_string(i), "c0", R[i] * C[0]);
    t.record("r0", "c" + std::to_string(i), R[0] * C[i]);
    t.record("r" + std::to_string(i), "c" + std::to_string(i), R[i] * C[i]);
  }
  t.complete();
  for (size_t i = 0; i < 4; i++) {
    for (size_t j = 0; j < 4; j++) {
      auto got = t.lookup("r" + std::to_string(i), "c" + std::to_string(j));
      REQUIRE(got.has_value());
      CHECK(*got == doctest::Approx(R[i] * C[j]).epsilon(0.15));
      CHECK(*got > 0);
    }
  }
  // Observed cells come through untouched.
  CHECK(*t.lookup("r2", "c2") == R[2] * C[2]);
  CHECK(t.is_observed("r2", "c2"));
  CHECK_FALSE(t.is_observed("r1", "c2"));
}

TEST_CASE("completion is deterministic and fails without observations") {
  auto build = [] {
    ProfileTable t;
    t.record("r0", "c0", 3.0);
    t.record("r1", "c1", 6.0);
    t.ensure_column("c2");
    t.complete();
    return t;
  };
  auto a = build();
  auto b = build();
  for (const auto& r : a.row_names())
    for (const auto& c : a.col_names())
      CHECK(*a.lookup(r, c) == *b.lookup(r, c));

  ProfileTable empty;
  empty.ensure_row("r");
  empty.ensure_column("c");
  CHECK_THROWS_AS(empty.complete(), Error);
}

TEST_CASE("csv round-trips values and observation flags") {
  ProfileTable t;
  t.record("score#b19", "c1000000", 1.25);
  t.record("score#b19", "c4000", 0.375);
  t.ensure_column("c32000");
  t.complete();
  auto text = t.to_csv();
  CHECK(text.substr(0, text.find('\n')) == "row,col,runtime_s,observed");
  auto back = ProfileTable::from_csv(text);
  CHECK(back.observed_count() == 2);
  for (const auto& c : t.col_names())
    CHECK(*back.lookup("score#b19", c) ==
          doctest::Approx(*t.lookup("score#b19", c)).epsilon(1e-9));
  CHECK(back.is_observed("score#b19", "c4000"));
  CHECK_FALSE(back.is_observed("score#b19", "c32000"));
  CHECK_THROWS_AS(ProfileTable::from_csv("row,col\nbad"), Error);
}

TEST_CASE("the chooser picks by goal with deterministic tie-breaks") {
  // Two columns on a 1000-byte input: c100 runs 10 tasks fast, c500 runs 2
  // tasks slow but cheap. cost proxy = mem/1024 * runtime * tasks * rate.
  Provisioner prov;
  std::string row = "p#b9";
  std::vector<ColumnSpec> grid = {Provisioner::column_for({100}),
                                  Provisioner::column_for({500})};
  prov.table().record(row, "c100", 10.0);
  prov.table().record(row, "c500", 20.0);
  const int64_t mem = 1024;
  const double rate = 1.0;  // cost(c100) = 10*10 = 100, cost(c500) = 20*2 = 40

  JobGoal best;
  auto d = prov.choose(row, best, grid, 1000, mem, rate);
  CHECK(d.column.id == "c100");  // fastest
  CHECK_FALSE(d.fallback);
  CHECK(d.predicted_runtime_s == doctest::Approx(10.0));
  CHECK(d.predicted_cost == doctest::Approx(100.0));

  JobGoal deadline;
  deadline.kind = JobGoal::Kind::deadline;
  deadline.value = 60.0;
  d = prov.choose(row, deadline, grid, 1000, mem, rate);
  CHECK(d.column.id == "c500");  // both feasible: cheapest wins
  CHECK_FALSE(d.fallback);

  deadline.value = 12.0;
  d = prov.choose(row, deadline, grid, 1000, mem, rate);
  CHECK(d.column.id == "c100");  // only the fast one makes it

  deadline.value = 1.0;
  d = prov.choose(row, deadline, grid, 1000, mem, rate);
  CHECK(d.fallback);  // nothing makes it: best effort, flagged
  CHECK(d.column.id == "c100");

  JobGoal cap;
  cap.kind = JobGoal::Kind::cost_cap;
  cap.value = 50.0;
  d = prov.choose(row, cap, grid, 1000, mem, rate);
  CHECK(d.column.id == "c500");  // fastest under the cap
  CHECK_FALSE(d.fallback);

  cap.value = 10.0;
  d = prov.choose(row, cap, grid, 1000, mem, rate);
  CHECK(d.fallback);
}

TEST_CASE("recording runs feeds the table through the column id") {
  Provisioner prov;
  auto col = Provisioner::column_for({250});
  prov.record_run("p#b9", col, 4.5);
  CHECK(prov.table().is_observed("p#b9", "c250"));
  CHECK(*prov.table().lookup("p#b9", "c250") == doctest::Approx(4.5));
}
