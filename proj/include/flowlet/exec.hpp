#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowlet/kernels.hpp"
#include "flowlet/pipeline.hpp"
#include "flowlet/store.hpp"

namespace flowlet {

// Object keys: <job>/s<stage>/w<wave>/<ordinal>-<total>/<name> with
// zero-padded ordinals so lexicographic listings come back in ordinal order.
std::string task_output_key(const std::string& job, int64_t stage, int64_t wave,
                            int64_t ordinal, int64_t total, const std::string& name);

struct ParsedKey {
  std::string job;
  int64_t stage = 0;
  int64_t wave = 0;
  int64_t ordinal = 0;
  int64_t total = 0;
  std::string name;
};

std::optional<ParsedKey> parse_output_key(const std::string& key);

// Waves inside one stage: sort runs as partition, scatter, gather; every
// other kind is a single wave.
int64_t wave_count(StageKind kind);

// Stable seed for partition sampling, derived from pipeline identity only so
// the simulated and local paths draw identically.
uint64_t partition_seed(const std::string& pipeline_name, int64_t stage);

struct TaskExecContext {
  ObjectStore* store = nullptr;
  const KernelRegistry* kernels = nullptr;
  const FormatRegistry* formats = nullptr;
  const DurationModel* durations = nullptr;
  int64_t sample_cap = 10000;
};

struct TaskPlan {
  int64_t duration_ms = 1;
  std::vector<std::pair<std::string, std::string>> writes;
  double work_units = 0;
  json note = json::object();  // extras recorded with the completion event
};

// Builds the payloads for one wave of one stage from the current store
// state. Deterministic: same store contents, same payloads.
std::vector<json> generate_wave_payloads(const TaskExecContext& ctx,
                                         const CompiledPipeline& pipeline,
                                         const std::string& job, int64_t stage,
                                         int64_t wave, const std::string& input_key,
                                         const std::map<int64_t, int64_t>& split_overrides);

// Runs one payload: reads its inputs, applies the stage operation or kernel,
// and returns the writes plus the modelled duration.
TaskPlan execute_task_payload(const TaskExecContext& ctx,
                              const CompiledPipeline& pipeline, const json& payload);

// Input objects of a stage: the job input for stage 0, else the final-wave
// outputs of the previous stage.
std::vector<std::string> stage_input_keys(const TaskExecContext& ctx,
                                          const CompiledPipeline& pipeline,
                                          const std::string& job, int64_t stage,
                                          const std::string& input_key);

int64_t effective_split_size(const CompiledPipeline& pipeline, int64_t stage,
                             const std::map<int64_t, int64_t>& split_overrides);

}  // namespace flowlet
