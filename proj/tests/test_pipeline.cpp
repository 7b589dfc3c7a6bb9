#include <string>

#include "doctest.h"
#include "flowlet/error.hpp"
#include "flowlet/pipeline.hpp"

using namespace flowlet;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::bad_state;
}

PipelineBuilder base_builder() {
  return PipelineBuilder("demo", "store://bucket", "log://tbl", 120);
}

}  // namespace

TEST_CASE("compiled document bytes are canonical and frozen") {
  auto p = base_builder()
               .input("new_line")
               .split(64)
               .run("toy_compress")
               .combine()
               .compile();
  const std::string want =
      R"({"input_format":"new_line","log":"log://tbl","name":"demo",)"
      R"("schema_version":1,"stages":[{"id":"s0","kind":"split","params":)"
      R"({"split_size":64},"trigger":"input"},{"id":"s1","kind":"run",)"
      R"("params":{"application":"toy_compress"},"trigger":"s0"},)"
      R"({"id":"s2","kind":"combine","params":{},"trigger":"s1"}],)"
      R"("table":"store://bucket","timeout":120})";
  CHECK(p.to_bytes() == want);
  CHECK(load_pipeline(p.to_bytes()).to_bytes() == want);
}

TEST_CASE("compile is idempotent through a load round trip") {
  auto p = base_builder()
               .input("tsv")
               .split(100)
               .map("test", "store://tables/train", "train")
               .run("toy_knn", json::object(), std::string("tsv"),
                    FunctionConfig{2048, "", ""})
               .combine()
               .compile();
  auto back = load_pipeline(p.to_bytes());
  CHECK(back == p);
  CHECK(load_pipeline(back.to_bytes()).to_bytes() == p.to_bytes());
}

TEST_CASE("compile rejects structural mistakes") {
  SUBCASE("empty pipeline") {
    CHECK(code_of([] { base_builder().compile(); }) == Errc::empty_pipeline);
  }
  SUBCASE("missing name") {
    CHECK(code_of([] {
            PipelineBuilder("", "store://b", "log://t", 10).split(1).compile();
          }) == Errc::malformed);
  }
  SUBCASE("bad store uri") {
    CHECK(code_of([] {
            PipelineBuilder("x", "bucket", "log://t", 10).split(1).compile();
          }) == Errc::invalid_uri);
  }
  SUBCASE("timeout must be positive") {
    CHECK(code_of([] {
            PipelineBuilder("x", "store://b", "log://t", 0).split(1).compile();
          }) == Errc::invalid_timeout);
    CHECK(code_of([] {
            PipelineBuilder("x", "store://b", "log://t", -3).split(1).compile();
          }) == Errc::invalid_timeout);
  }
  SUBCASE("item stages need an input format") {
    CHECK(code_of([] { base_builder().split(10).compile(); }) ==
          Errc::no_input_format);
    // A byte-level stage chain does not.
    auto p = base_builder().run("identity").compile();
    CHECK(p.stage_count() == 1);
  }
}

TEST_CASE("stage parameters are validated by kind") {
  auto bad = [](StageKind kind, json params) {
    return code_of([&] { validate_stage_params(kind, params); });
  };
  CHECK(bad(StageKind::top, {{"identifier", "0"}}) == Errc::missing_param);
  CHECK(bad(StageKind::top, {{"identifier", "0"}, {"number", 0}}) ==
        Errc::malformed);
  CHECK(bad(StageKind::top, {{"identifier", "0"}, {"number", "five"}}) ==
        Errc::malformed);
  CHECK(bad(StageKind::split, {{"split_size", -1}}) == Errc::malformed);
  CHECK(bad(StageKind::split, {{"chunk", 4}}) == Errc::unknown_param);
  CHECK(bad(StageKind::match, {{"identifier", "0"}, {"find", "middle_sum"}}) ==
        Errc::missing_param);
  CHECK(bad(StageKind::map, {{"input_key", "a"}, {"table_key", "b"},
                             {"map_table", "no-scheme"}}) == Errc::invalid_uri);
  CHECK(bad(StageKind::run, json::array()) == Errc::malformed);
  CHECK_THROWS_AS(parse_stage_kind("reduce"), Error);

  validate_stage_params(StageKind::sort, {{"identifier", "1"}});
  validate_stage_params(StageKind::partition,
                        {{"identifier", "0"}, {"ranges", 4}});
}

TEST_CASE("loading rejects documents that do not match the schema") {
  auto p = base_builder().input("new_line").split(10).compile();
  auto doc = p.to_json();

  auto bad = [&](json d) {
    return code_of([&] { load_pipeline(d.dump()); });
  };

  CHECK(bad(json::array()) == Errc::malformed);
  CHECK(code_of([] { load_pipeline("not json"); }) == Errc::malformed);

  json no_ver = doc;
  no_ver.erase("schema_version");
  CHECK(bad(no_ver) == Errc::malformed);

  json wrong_ver = doc;
  wrong_ver["schema_version"] = 99;
  CHECK(bad(wrong_ver) == Errc::schema_mismatch);

  json extra = doc;
  extra["color"] = "red";
  CHECK(bad(extra) == Errc::malformed);

  json bad_id = doc;
  bad_id["stages"][0]["id"] = "s7";
  CHECK(bad(bad_id) == Errc::malformed);

  json bad_trigger = doc;
  bad_trigger["stages"][0]["trigger"] = "s9";
  CHECK(bad(bad_trigger) == Errc::malformed);

  // Re-validation catches params errors in hand-edited documents.
  json bad_params = doc;
  bad_params["stages"][0]["params"]["split_size"] = "big";
  CHECK(bad(bad_params) == Errc::malformed);
}

TEST_CASE("stage input format follows the nearest upstream run stage") {
  auto p = base_builder()
               .input("new_line")
               .split(50)
               .run("toy_score", json::object(), std::string("tsv"))
               .combine("1")
               .run("identity")
               .combine()
               .compile();
  CHECK(p.stage_input_format(0) == "new_line");
  CHECK(p.stage_input_format(1) == "new_line");
  CHECK(p.stage_input_format(2) == "tsv");
  CHECK(p.stage_input_format(3) == "tsv");
  CHECK(p.stage_input_format(4) == "tsv");  // identity sets no output format
}

TEST_CASE("memory config overlays stage over pipeline over default") {
  FunctionConfig pipe_cfg;
  pipe_cfg.memory_size = 3072;
  auto p = PipelineBuilder("m", "store://b", "log://t", 60, pipe_cfg)
               .input("new_line")
               .split(10)
               .run("identity", json::object(), std::nullopt,
                    FunctionConfig{512, "", ""})
               .compile();
  CHECK(p.stage_memory_mb(0) == 3072);
  CHECK(p.stage_memory_mb(1) == 512);

  auto bare = base_builder().run("identity").compile();
  CHECK(bare.stage_memory_mb(0) == kDefaultMemoryMb);
}

TEST_CASE("unsized stages are the split and sort stages without a size") {
  auto p = base_builder()
               .input("new_line")
               .split()
               .run("identity")
               .sort("0")
               .sort("0", 500)
               .split(100)
               .compile();
  CHECK(p.unsized_stages() == std::vector<size_t>{0, 2});
}
