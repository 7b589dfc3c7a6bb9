#include "flowlet/pipeline.hpp"

#include <algorithm>

#include "flowlet/error.hpp"

namespace flowlet {

namespace {

void check_uri(const std::string& uri, const std::string& what) {
  auto pos = uri.find("://");
  if (pos == std::string::npos || pos == 0 || pos + 3 >= uri.size())
    raise(Errc::invalid_uri, what + " '" + uri + "'");
}

bool needs_format(StageKind kind, const json& params) {
  switch (kind) {
    case StageKind::split:
    case StageKind::top:
    case StageKind::match:
    case StageKind::sort:
    case StageKind::partition:
      return true;
    case StageKind::combine:
      return params.contains("identifier");
    case StageKind::map:
    case StageKind::run:
      return false;
  }
  return false;
}

enum class ParamType { string, pos_int, boolean, object, uri, find_rule };

struct ParamRule {
  const char* key;
  ParamType type;
  bool required;
};

const std::vector<ParamRule>& rules_for(StageKind kind) {
  static const std::vector<ParamRule> split_rules = {
      {"split_size", ParamType::pos_int, false}};
  static const std::vector<ParamRule> combine_rules = {
      {"identifier", ParamType::string, false}};
  static const std::vector<ParamRule> top_rules = {
      {"identifier", ParamType::string, true},
      {"number", ParamType::pos_int, true}};
  static const std::vector<ParamRule> match_rules = {
      {"find", ParamType::find_rule, true},
      {"identifier", ParamType::string, true}};
  static const std::vector<ParamRule> map_rules = {
      {"directories", ParamType::boolean, false},
      {"input_key", ParamType::string, true},
      {"map_table", ParamType::uri, true},
      {"table_key", ParamType::string, true}};
  static const std::vector<ParamRule> sort_rules = {
      {"identifier", ParamType::string, true},
      {"split_size", ParamType::pos_int, false}};
  static const std::vector<ParamRule> partition_rules = {
      {"identifier", ParamType::string, true},
      {"ranges", ParamType::pos_int, true}};
  static const std::vector<ParamRule> run_rules = {
      {"application", ParamType::string, true},
      {"output_format", ParamType::string, false},
      {"params", ParamType::object, false}};
  switch (kind) {
    case StageKind::split: return split_rules;
    case StageKind::combine: return combine_rules;
    case StageKind::top: return top_rules;
    case StageKind::match: return match_rules;
    case StageKind::map: return map_rules;
    case StageKind::sort: return sort_rules;
    case StageKind::partition: return partition_rules;
    case StageKind::run: return run_rules;
  }
  return run_rules;
}

void check_value(const std::string& stage, const ParamRule& rule, const json& v) {
  switch (rule.type) {
    case ParamType::string:
      if (!v.is_string())
        raise(Errc::malformed, stage + "." + rule.key + " must be a string");
      break;
    case ParamType::pos_int:
      if (!v.is_number_integer() || v.get<int64_t>() <= 0)
        raise(Errc::malformed, stage + "." + rule.key + " must be a positive integer");
      break;
    case ParamType::boolean:
      if (!v.is_boolean())
        raise(Errc::malformed, stage + "." + rule.key + " must be a boolean");
      break;
    case ParamType::object:
      if (!v.is_object())
        raise(Errc::malformed, stage + "." + rule.key + " must be an object");
      break;
    case ParamType::uri:
      if (!v.is_string())
        raise(Errc::malformed, stage + "." + rule.key + " must be a URI string");
      check_uri(v.get<std::string>(), stage + "." + rule.key);
      break;
    case ParamType::find_rule:
      if (!v.is_string())
        raise(Errc::malformed, stage + "." + rule.key + " must be a string");
      parse_find_rule(v.get<std::string>());
      break;
  }
}

}  // namespace

bool FunctionConfig::empty() const {
  return !memory_size && region.empty() && role.empty();
}

json FunctionConfig::to_json() const {
  json doc = json::object();
  if (memory_size) doc["memory_size"] = *memory_size;
  if (!region.empty()) doc["region"] = region;
  if (!role.empty()) doc["role"] = role;
  return doc;
}

FunctionConfig FunctionConfig::from_json(const json& doc) {
  FunctionConfig cfg;
  if (!doc.is_object()) raise(Errc::malformed, "config must be an object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.key() == "memory_size") {
      if (!it.value().is_number_integer() || it.value().get<int64_t>() <= 0)
        raise(Errc::malformed, "config.memory_size must be a positive integer");
      cfg.memory_size = it.value().get<int64_t>();
    } else if (it.key() == "region") {
      if (!it.value().is_string()) raise(Errc::malformed, "config.region must be a string");
      cfg.region = it.value().get<std::string>();
    } else if (it.key() == "role") {
      if (!it.value().is_string()) raise(Errc::malformed, "config.role must be a string");
      cfg.role = it.value().get<std::string>();
    } else {
      raise(Errc::unknown_param, "config does not take '" + it.key() + "'");
    }
  }
  return cfg;
}

FunctionConfig FunctionConfig::overlaid_on(const FunctionConfig& base) const {
  FunctionConfig out = base;
  if (memory_size) out.memory_size = memory_size;
  if (!region.empty()) out.region = region;
  if (!role.empty()) out.role = role;
  return out;
}

const char* stage_kind_name(StageKind kind) {
  switch (kind) {
    case StageKind::split: return "split";
    case StageKind::combine: return "combine";
    case StageKind::top: return "top";
    case StageKind::match: return "match";
    case StageKind::map: return "map";
    case StageKind::sort: return "sort";
    case StageKind::partition: return "partition";
    case StageKind::run: return "run";
  }
  return "run";
}

StageKind parse_stage_kind(const std::string& name) {
  static const std::pair<const char*, StageKind> table[] = {
      {"split", StageKind::split}, {"combine", StageKind::combine},
      {"top", StageKind::top},     {"match", StageKind::match},
      {"map", StageKind::map},     {"sort", StageKind::sort},
      {"partition", StageKind::partition}, {"run", StageKind::run}};
  for (auto& [n, k] : table)
    if (name == n) return k;
  raise(Errc::unknown_kind, "no stage kind '" + name + "'");
}

void validate_stage_params(StageKind kind, const json& params) {
  if (!params.is_object()) raise(Errc::malformed, "stage params must be an object");
  const std::string stage = stage_kind_name(kind);
  const auto& rules = rules_for(kind);
  for (auto it = params.begin(); it != params.end(); ++it) {
    auto rule = std::find_if(rules.begin(), rules.end(),
                             [&](const ParamRule& r) { return it.key() == r.key; });
    if (rule == rules.end())
      raise(Errc::unknown_param, stage + " does not take '" + it.key() + "'");
    check_value(stage, *rule, it.value());
  }
  for (const auto& rule : rules)
    if (rule.required && !params.contains(rule.key))
      raise(Errc::missing_param, stage + " needs '" + std::string(rule.key) + "'");
}

std::string CompiledPipeline::stage_id(size_t index) {
  return "s" + std::to_string(index);
}

std::string CompiledPipeline::stage_input_format(size_t index) const {
  for (size_t i = index; i > 0; i--) {
    const auto& st = spec.stages[i - 1];
    if (st.kind == StageKind::run && st.params.contains("output_format"))
      return st.params["output_format"].get<std::string>();
  }
  return spec.input_format;
}

FunctionConfig CompiledPipeline::stage_config(size_t index) const {
  return spec.stages[index].config.overlaid_on(spec.config);
}

int64_t CompiledPipeline::stage_memory_mb(size_t index) const {
  auto cfg = stage_config(index);
  return cfg.memory_size.value_or(kDefaultMemoryMb);
}

std::vector<size_t> CompiledPipeline::unsized_stages() const {
  std::vector<size_t> out;
  for (size_t i = 0; i < spec.stages.size(); i++) {
    const auto& st = spec.stages[i];
    if ((st.kind == StageKind::split || st.kind == StageKind::sort) &&
        !st.params.contains("split_size"))
      out.push_back(i);
  }
  return out;
}

json CompiledPipeline::to_json() const {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["name"] = spec.name;
  doc["table"] = spec.table;
  doc["log"] = spec.log;
  doc["timeout"] = spec.timeout_s;
  if (!spec.config.empty()) doc["config"] = spec.config.to_json();
  if (!spec.input_format.empty()) doc["input_format"] = spec.input_format;
  doc["stages"] = json::array();
  for (size_t i = 0; i < spec.stages.size(); i++) {
    const auto& st = spec.stages[i];
    json js;
    js["id"] = stage_id(i);
    js["trigger"] = i == 0 ? "input" : stage_id(i - 1);
    js["kind"] = stage_kind_name(st.kind);
    js["params"] = st.params;
    if (!st.config.empty()) js["config"] = st.config.to_json();
    doc["stages"].push_back(std::move(js));
  }
  return doc;
}

std::string CompiledPipeline::to_bytes() const { return to_json().dump(); }

bool CompiledPipeline::operator==(const CompiledPipeline& other) const {
  return to_bytes() == other.to_bytes();
}

CompiledPipeline compile(const PipelineSpec& spec) {
  if (spec.name.empty()) raise(Errc::malformed, "pipeline needs a name");
  check_uri(spec.table, "table");
  check_uri(spec.log, "log");
  if (spec.timeout_s <= 0)
    raise(Errc::invalid_timeout, std::to_string(spec.timeout_s));
  if (spec.stages.empty()) raise(Errc::empty_pipeline, spec.name);
  bool format_needed = false;
  for (const auto& st : spec.stages) {
    validate_stage_params(st.kind, st.params);
    format_needed = format_needed || needs_format(st.kind, st.params);
  }
  if (format_needed && spec.input_format.empty())
    raise(Errc::no_input_format, spec.name);
  return CompiledPipeline{spec};
}

CompiledPipeline load_pipeline(std::string_view bytes) {
  json doc = json::parse(bytes, nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    raise(Errc::malformed, "pipeline document is not a JSON object");
  if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer())
    raise(Errc::malformed, "missing schema_version");
  if (doc["schema_version"].get<int>() != CompiledPipeline::kSchemaVersion)
    raise(Errc::schema_mismatch,
          "schema_version " + doc["schema_version"].dump() + " != " +
              std::to_string(CompiledPipeline::kSchemaVersion));
  try {
    PipelineSpec spec;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      const auto& key = it.key();
      if (key != "schema_version" && key != "name" && key != "table" &&
          key != "log" && key != "timeout" && key != "config" &&
          key != "input_format" && key != "stages")
        raise(Errc::malformed, "unknown field '" + key + "'");
    }
    spec.name = doc.at("name").get<std::string>();
    spec.table = doc.at("table").get<std::string>();
    spec.log = doc.at("log").get<std::string>();
    if (!doc.at("timeout").is_number_integer())
      raise(Errc::malformed, "timeout must be an integer");
    spec.timeout_s = doc.at("timeout").get<int64_t>();
    if (doc.contains("config")) spec.config = FunctionConfig::from_json(doc["config"]);
    if (doc.contains("input_format"))
      spec.input_format = doc["input_format"].get<std::string>();
    if (!doc.at("stages").is_array())
      raise(Errc::malformed, "stages must be an array");
    size_t index = 0;
    for (const auto& js : doc["stages"]) {
      if (!js.is_object()) raise(Errc::malformed, "stage must be an object");
      for (auto it = js.begin(); it != js.end(); ++it) {
        const auto& key = it.key();
        if (key != "id" && key != "trigger" && key != "kind" && key != "params" &&
            key != "config")
          raise(Errc::malformed, "unknown stage field '" + key + "'");
      }
      StageSpec st;
      st.kind = parse_stage_kind(js.at("kind").get<std::string>());
      st.params = js.value("params", json::object());
      if (js.contains("config")) st.config = FunctionConfig::from_json(js["config"]);
      std::string want_id = CompiledPipeline::stage_id(index);
      std::string want_trigger =
          index == 0 ? "input" : CompiledPipeline::stage_id(index - 1);
      if (js.at("id").get<std::string>() != want_id)
        raise(Errc::malformed, "stage id out of order: " + js["id"].dump());
      if (js.at("trigger").get<std::string>() != want_trigger)
        raise(Errc::malformed, "stage trigger must be '" + want_trigger + "'");
      spec.stages.push_back(std::move(st));
      index++;
    }
    return compile(spec);
  } catch (const Error& e) {
    if (e.code() == Errc::schema_mismatch) throw;
    raise(Errc::malformed, e.what());
  } catch (const json::exception& e) {
    raise(Errc::malformed, e.what());
  }
}

PipelineBuilder::PipelineBuilder(std::string name, std::string table,
                                 std::string log, int64_t timeout_s,
                                 FunctionConfig config) {
  spec_.name = std::move(name);
  spec_.table = std::move(table);
  spec_.log = std::move(log);
  spec_.timeout_s = timeout_s;
  spec_.config = std::move(config);
  if (spec_.name.empty()) raise(Errc::malformed, "pipeline needs a name");
  check_uri(spec_.table, "table");
  check_uri(spec_.log, "log");
  if (spec_.timeout_s <= 0)
    raise(Errc::invalid_timeout, std::to_string(spec_.timeout_s));
}

PipelineBuilder& PipelineBuilder::input(const std::string& format) {
  spec_.input_format = format;
  return *this;
}

PipelineBuilder& PipelineBuilder::stage(StageKind kind, json params,
                                        FunctionConfig config) {
  validate_stage_params(kind, params);
  spec_.stages.push_back(StageSpec{kind, std::move(params), std::move(config)});
  return *this;
}

PipelineBuilder& PipelineBuilder::split(std::optional<int64_t> split_size,
                                        FunctionConfig config) {
  json p = json::object();
  if (split_size) p["split_size"] = *split_size;
  return stage(StageKind::split, std::move(p), std::move(config));
}

PipelineBuilder& PipelineBuilder::combine(std::optional<std::string> identifier,
                                          FunctionConfig config) {
  json p = json::object();
  if (identifier) p["identifier"] = *identifier;
  return stage(StageKind::combine, std::move(p), std::move(config));
}

PipelineBuilder& PipelineBuilder::top(const std::string& identifier, int64_t number,
                                      FunctionConfig config) {
  return stage(StageKind::top, json{{"identifier", identifier}, {"number", number}},
               std::move(config));
}

PipelineBuilder& PipelineBuilder::match(const std::string& identifier,
                                        const std::string& find,
                                        FunctionConfig config) {
  return stage(StageKind::match, json{{"identifier", identifier}, {"find", find}},
               std::move(config));
}

PipelineBuilder& PipelineBuilder::map(const std::string& input_key,
                                      const std::string& map_table,
                                      const std::string& table_key,
                                      std::optional<bool> directories,
                                      FunctionConfig config) {
  json p = {{"input_key", input_key}, {"map_table", map_table}, {"table_key", table_key}};
  if (directories) p["directories"] = *directories;
  return stage(StageKind::map, std::move(p), std::move(config));
}

PipelineBuilder& PipelineBuilder::sort(const std::string& identifier,
                                       std::optional<int64_t> split_size,
                                       FunctionConfig config) {
  json p = {{"identifier", identifier}};
  if (split_size) p["split_size"] = *split_size;
  return stage(StageKind::sort, std::move(p), std::move(config));
}

PipelineBuilder& PipelineBuilder::partition(const std::string& identifier,
                                            int64_t ranges, FunctionConfig config) {
  return stage(StageKind::partition,
               json{{"identifier", identifier}, {"ranges", ranges}},
               std::move(config));
}

PipelineBuilder& PipelineBuilder::run(const std::string& application, json params,
                                      std::optional<std::string> output_format,
                                      FunctionConfig config) {
  json p = {{"application", application}};
  if (!params.empty()) p["params"] = std::move(params);
  if (output_format) p["output_format"] = *output_format;
  return stage(StageKind::run, std::move(p), std::move(config));
}

CompiledPipeline PipelineBuilder::compile() const { return flowlet::compile(spec_); }

}  // namespace flowlet
