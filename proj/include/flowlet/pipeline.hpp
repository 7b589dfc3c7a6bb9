#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowlet/primitives.hpp"

namespace flowlet {

// Memory assigned to a function when neither the pipeline nor the stage sets
// one.
inline constexpr int64_t kDefaultMemoryMb = 1792;

struct FunctionConfig {
  std::optional<int64_t> memory_size;  // MB
  std::string region;
  std::string role;

  bool empty() const;
  json to_json() const;
  static FunctionConfig from_json(const json& doc);
  // Stage config wins field by field over the pipeline config.
  FunctionConfig overlaid_on(const FunctionConfig& base) const;
};

enum class StageKind { split, combine, top, match, map, sort, partition, run };

const char* stage_kind_name(StageKind kind);
StageKind parse_stage_kind(const std::string& name);  // UnknownKind

struct StageSpec {
  StageKind kind = StageKind::run;
  json params = json::object();
  FunctionConfig config;
};

struct PipelineSpec {
  std::string name;
  std::string table;  // object store URI
  std::string log;    // execution log URI
  int64_t timeout_s = 0;
  FunctionConfig config;
  std::string input_format;
  std::vector<StageSpec> stages;
};

// Checks the parameter object for a stage kind: required keys present,
// unknown keys rejected, values typed and in range.
void validate_stage_params(StageKind kind, const json& params);

struct CompiledPipeline {
  static constexpr int kSchemaVersion = 1;

  PipelineSpec spec;

  json to_json() const;
  std::string to_bytes() const;  // canonical: sorted keys, no whitespace

  size_t stage_count() const { return spec.stages.size(); }
  static std::string stage_id(size_t index);
  // Format the stage parses its input with: the nearest upstream run stage's
  // output_format, else the pipeline input format.
  std::string stage_input_format(size_t index) const;
  FunctionConfig stage_config(size_t index) const;
  int64_t stage_memory_mb(size_t index) const;

  // Chunk-producing stages (split and sort) that leave split_size to the
  // runtime; these are the ones auto-sizing may pin.
  std::vector<size_t> unsized_stages() const;

  bool operator==(const CompiledPipeline& other) const;
};

CompiledPipeline compile(const PipelineSpec& spec);
CompiledPipeline load_pipeline(std::string_view bytes);  // Malformed | SchemaMismatch

class PipelineBuilder {
 public:
  PipelineBuilder(std::string name, std::string table, std::string log,
                  int64_t timeout_s, FunctionConfig config = {});

  PipelineBuilder& input(const std::string& format);
  PipelineBuilder& split(std::optional<int64_t> split_size = {},
                         FunctionConfig config = {});
  PipelineBuilder& combine(std::optional<std::string> identifier = {},
                           FunctionConfig config = {});
  PipelineBuilder& top(const std::string& identifier, int64_t number,
                       FunctionConfig config = {});
  PipelineBuilder& match(const std::string& identifier, const std::string& find,
                         FunctionConfig config = {});
  PipelineBuilder& map(const std::string& input_key, const std::string& map_table,
                       const std::string& table_key,
                       std::optional<bool> directories = {},
                       FunctionConfig config = {});
  PipelineBuilder& sort(const std::string& identifier,
                        std::optional<int64_t> split_size = {},
                        FunctionConfig config = {});
  PipelineBuilder& partition(const std::string& identifier, int64_t ranges,
                             FunctionConfig config = {});
  PipelineBuilder& run(const std::string& application, json params = json::object(),
                       std::optional<std::string> output_format = {},
                       FunctionConfig config = {});
  PipelineBuilder& stage(StageKind kind, json params, FunctionConfig config = {});

  const PipelineSpec& spec() const { return spec_; }
  CompiledPipeline compile() const;

 private:
  PipelineSpec spec_;
};

}  // namespace flowlet
