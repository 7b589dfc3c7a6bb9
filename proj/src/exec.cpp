#include "flowlet/exec.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>

#include "flowlet/error.hpp"
#include "flowlet/primitives.hpp"

namespace flowlet {

namespace {

std::string pad6(int64_t v) {
  char buf[24];
  snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(v));
  return buf;
}

std::string uri_prefix(const std::string& uri) {
  auto pos = uri.find("://");
  std::string p = pos == std::string::npos ? uri : uri.substr(pos + 3);
  if (!p.empty() && p.back() != '/') p += '/';
  return p;
}

std::string task_id_for(int64_t stage, int64_t wave, int64_t ordinal) {
  return "s" + std::to_string(stage) + ".w" + std::to_string(wave) + ".t" +
         std::to_string(ordinal);
}

std::vector<std::pair<std::string, std::string>> read_inputs(
    const TaskExecContext& ctx, const json& payload) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : payload.at("inputs")) {
    auto key = k.get<std::string>();
    out.emplace_back(key, ctx.store->get(key));
  }
  return out;
}

std::string concat_bytes(const std::vector<std::pair<std::string, std::string>>& in) {
  std::string all;
  for (const auto& [k, b] : in) all += b;
  return all;
}

// Chunk set from input objects: ordinals parse out of the keys when every
// key follows the output schema, otherwise list position is the ordinal.
std::vector<Chunk> chunks_from_inputs(
    const std::vector<std::pair<std::string, std::string>>& in) {
  std::vector<Chunk> chunks;
  bool parsed_all = true;
  for (const auto& [key, bytes] : in) {
    auto pk = parse_output_key(key);
    if (!pk) {
      parsed_all = false;
      break;
    }
    Chunk c;
    c.path = key;
    c.ordinal = pk->ordinal;
    c.total = pk->total;
    c.bytes = bytes;
    chunks.push_back(std::move(c));
  }
  if (parsed_all && !in.empty()) return chunks;
  chunks.clear();
  for (size_t i = 0; i < in.size(); i++) {
    Chunk c;
    c.path = in[i].first;
    c.ordinal = static_cast<int64_t>(i);
    c.total = static_cast<int64_t>(in.size());
    c.bytes = in[i].second;
    chunks.push_back(std::move(c));
  }
  return chunks;
}

RangeSet load_ranges(const TaskExecContext& ctx, const json& payload) {
  auto doc = json::parse(ctx.store->get(payload.at("ranges_key").get<std::string>()));
  return RangeSet::from_json(doc);
}

int64_t modelled_ms(const TaskExecContext& ctx, const std::string& type,
                    double work) {
  return llround(ctx.durations->duration_ms(type, work));
}

}  // namespace

std::string task_output_key(const std::string& job, int64_t stage, int64_t wave,
                            int64_t ordinal, int64_t total, const std::string& name) {
  return job + "/s" + std::to_string(stage) + "/w" + std::to_string(wave) + "/" +
         pad6(ordinal) + "-" + pad6(total) + "/" + name;
}

std::optional<ParsedKey> parse_output_key(const std::string& key) {
  std::vector<std::string> tok;
  size_t pos = 0;
  while (tok.size() < 4) {
    size_t s = key.find('/', pos);
    if (s == std::string::npos) return std::nullopt;
    tok.push_back(key.substr(pos, s - pos));
    pos = s + 1;
  }
  if (pos >= key.size()) return std::nullopt;
  ParsedKey pk;
  pk.job = tok[0];
  pk.name = key.substr(pos);
  if (tok[1].size() < 2 || tok[1][0] != 's') return std::nullopt;
  if (tok[2].size() < 2 || tok[2][0] != 'w') return std::nullopt;
  auto num = [](const std::string& s, size_t start, int64_t& out) {
    if (start >= s.size()) return false;
    for (size_t i = start; i < s.size(); i++)
      if (!isdigit(static_cast<unsigned char>(s[i]))) return false;
    out = std::stoll(s.substr(start));
    return true;
  };
  if (!num(tok[1], 1, pk.stage)) return std::nullopt;
  if (!num(tok[2], 1, pk.wave)) return std::nullopt;
  auto dash = tok[3].find('-');
  if (dash == std::string::npos) return std::nullopt;
  std::string a = tok[3].substr(0, dash), b = tok[3].substr(dash + 1);
  if (a.empty() || b.empty()) return std::nullopt;
  if (!num(a, 0, pk.ordinal) || !num(b, 0, pk.total)) return std::nullopt;
  return pk;
}

int64_t wave_count(StageKind kind) {
  return kind == StageKind::sort ? 3 : 1;
}

uint64_t partition_seed(const std::string& pipeline_name, int64_t stage) {
  uint64_t h = 1469598103934665603ull;
  auto feed = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  feed(pipeline_name);
  feed("#");
  feed(std::to_string(stage));
  return h;
}

int64_t effective_split_size(const CompiledPipeline& pipeline, int64_t stage,
                             const std::map<int64_t, int64_t>& split_overrides) {
  const auto& st = pipeline.spec.stages[static_cast<size_t>(stage)];
  if (st.params.contains("split_size")) return st.params["split_size"].get<int64_t>();
  auto it = split_overrides.find(stage);
  if (it != split_overrides.end()) return it->second;
  return kDefaultSplitSize;
}

std::vector<std::string> stage_input_keys(const TaskExecContext& ctx,
                                          const CompiledPipeline& pipeline,
                                          const std::string& job, int64_t stage,
                                          const std::string& input_key) {
  if (stage == 0) return {input_key};
  int64_t prev = stage - 1;
  int64_t last_wave = wave_count(pipeline.spec.stages[static_cast<size_t>(prev)].kind) - 1;
  auto prefix = job + "/s" + std::to_string(prev) + "/w" + std::to_string(last_wave) + "/";
  return ctx.store->list(prefix);
}

std::vector<json> generate_wave_payloads(const TaskExecContext& ctx,
                                         const CompiledPipeline& pipeline,
                                         const std::string& job, int64_t stage,
                                         int64_t wave, const std::string& input_key,
                                         const std::map<int64_t, int64_t>& split_overrides) {
  const auto& st = pipeline.spec.stages[static_cast<size_t>(stage)];
  auto inputs = stage_input_keys(ctx, pipeline, job, stage, input_key);
  if (inputs.empty()) raise(Errc::bad_state, "stage " + std::to_string(stage) + " has no inputs");
  std::string fmtname = pipeline.stage_input_format(stage);

  auto base = [&](int64_t w, int64_t ordinal, int64_t total, const char* kind) {
    json p;
    p["job"] = job;
    p["stage"] = stage;
    p["wave"] = w;
    p["task"] = task_id_for(stage, w, ordinal);
    p["kind"] = kind;
    p["ordinal"] = ordinal;
    p["total"] = total;
    p["format"] = fmtname;
    return p;
  };
  auto all_inputs = [&](json& p) { p["inputs"] = inputs; };

  std::vector<json> out;
  switch (st.kind) {
    case StageKind::split: {
      if (inputs.size() != 1)
        raise(Errc::bad_state, "split stage expects exactly one input object");
      json p = base(0, 0, 1, "split");
      all_inputs(p);
      p["split_size"] = effective_split_size(pipeline, stage, split_overrides);
      out.push_back(std::move(p));
      break;
    }
    case StageKind::combine: {
      json p = base(0, 0, 1, "combine");
      all_inputs(p);
      if (st.params.contains("identifier")) p["identifier"] = st.params["identifier"];
      out.push_back(std::move(p));
      break;
    }
    case StageKind::top: {
      json p = base(0, 0, 1, "top");
      all_inputs(p);
      p["identifier"] = st.params["identifier"];
      p["number"] = st.params["number"];
      out.push_back(std::move(p));
      break;
    }
    case StageKind::match: {
      json p = base(0, 0, 1, "match");
      all_inputs(p);
      p["identifier"] = st.params["identifier"];
      p["find"] = st.params["find"];
      out.push_back(std::move(p));
      break;
    }
    case StageKind::map: {
      json p = base(0, 0, 1, "map");
      all_inputs(p);
      p["map_table"] = uri_prefix(st.params["map_table"].get<std::string>());
      p["input_key"] = st.params["input_key"];
      p["table_key"] = st.params["table_key"];
      p["directories"] = st.params.value("directories", false);
      out.push_back(std::move(p));
      break;
    }
    case StageKind::partition: {
      json p = base(0, 0, 1, "partition");
      all_inputs(p);
      p["identifier"] = st.params["identifier"];
      p["ranges"] = st.params["ranges"];
      p["seed"] = partition_seed(pipeline.spec.name, stage);
      p["out_wave"] = 0;
      out.push_back(std::move(p));
      break;
    }
    case StageKind::run: {
      int64_t total = static_cast<int64_t>(inputs.size());
      for (int64_t i = 0; i < total; i++) {
        json p = base(0, i, total, "run");
        p["inputs"] = json::array({inputs[static_cast<size_t>(i)]});
        p["application"] = st.params["application"];
        p["app_params"] = st.params.value("params", json::object());
        out.push_back(std::move(p));
      }
      break;
    }
    case StageKind::sort: {
      std::string ranges_key = task_output_key(job, stage, 0, 0, 1, "ranges.json");
      if (wave == 0) {
        int64_t bytes = 0;
        for (const auto& k : inputs) bytes += ctx.store->size_of(k);
        int64_t split = effective_split_size(pipeline, stage, split_overrides);
        int64_t count = std::max<int64_t>(1, (bytes + split - 1) / split);
        json p = base(0, 0, 1, "sort_partition");
        all_inputs(p);
        p["identifier"] = st.params["identifier"];
        p["ranges"] = count;
        p["seed"] = partition_seed(pipeline.spec.name, stage);
        p["out_wave"] = 0;
        out.push_back(std::move(p));
      } else if (wave == 1) {
        auto rs = RangeSet::from_json(json::parse(ctx.store->get(ranges_key)));
        int64_t n = static_cast<int64_t>(rs.ranges.size());
        int64_t k = static_cast<int64_t>(inputs.size());
        for (int64_t i = 0; i < k; i++) {
          json p = base(1, i, k, "sort_scatter");
          p["inputs"] = json::array({inputs[static_cast<size_t>(i)]});
          p["identifier"] = st.params["identifier"];
          p["ranges_key"] = ranges_key;
          p["chunk_index"] = i;
          p["chunk_total"] = k;
          p["range_count"] = n;
          out.push_back(std::move(p));
        }
      } else {
        auto rs = RangeSet::from_json(json::parse(ctx.store->get(ranges_key)));
        int64_t n = static_cast<int64_t>(rs.ranges.size());
        int64_t k = static_cast<int64_t>(inputs.size());
        for (int64_t b = 0; b < n; b++) {
          json p = base(2, b, n, "sort_gather");
          json ins = json::array();
          for (int64_t i = 0; i < k; i++)
            ins.push_back(task_output_key(job, stage, 1, i * n + b, k * n, "bucket"));
          p["inputs"] = ins;
          p["identifier"] = st.params["identifier"];
          p["ranges_key"] = ranges_key;
          p["bucket"] = b;
          p["range_count"] = n;
          out.push_back(std::move(p));
        }
      }
      break;
    }
  }
  return out;
}

TaskPlan execute_task_payload(const TaskExecContext& ctx,
                              const CompiledPipeline& pipeline, const json& payload) {
  TaskPlan plan;
  const std::string kind = payload.at("kind").get<std::string>();
  const std::string job = payload.at("job").get<std::string>();
  int64_t stage = payload.at("stage").get<int64_t>();
  int64_t ordinal = payload.at("ordinal").get<int64_t>();
  int64_t total = payload.at("total").get<int64_t>();
  std::string fmtname = payload.value("format", std::string{});
  auto fmt = [&]() -> const Format& { return ctx.formats->get(fmtname); };

  if (kind == "split") {
    auto in = read_inputs(ctx, payload);
    const std::string& blob = in[0].second;
    auto chunks = split_blob(blob, fmt(), payload.at("split_size").get<int64_t>());
    for (const auto& c : chunks)
      plan.writes.emplace_back(
          task_output_key(job, stage, 0, c.ordinal, c.total, "part"), c.bytes);
    plan.work_units = static_cast<double>(blob.size());
    plan.duration_ms = modelled_ms(ctx, "split", plan.work_units);
  } else if (kind == "combine") {
    auto in = read_inputs(ctx, payload);
    auto chunks = chunks_from_inputs(in);
    std::optional<std::string> identifier;
    if (payload.contains("identifier"))
      identifier = payload["identifier"].get<std::string>();
    auto bytes = combine_chunks(chunks, fmt(), identifier);
    plan.work_units = static_cast<double>(concat_bytes(in).size());
    plan.writes.emplace_back(task_output_key(job, stage, 0, ordinal, total, "out"),
                             std::move(bytes));
    plan.duration_ms = modelled_ms(ctx, "combine", plan.work_units);
  } else if (kind == "top") {
    auto in = read_inputs(ctx, payload);
    auto blob = concat_bytes(in);
    auto bytes = top_items(blob, fmt(), payload.at("identifier").get<std::string>(),
                           payload.at("number").get<int64_t>());
    plan.work_units = static_cast<double>(blob.size());
    plan.writes.emplace_back(task_output_key(job, stage, 0, ordinal, total, "out"),
                             std::move(bytes));
    plan.duration_ms = modelled_ms(ctx, "top", plan.work_units);
  } else if (kind == "match") {
    auto in = read_inputs(ctx, payload);
    auto chunks = chunks_from_inputs(in);
    const Chunk& winner =
        match_chunks(chunks, fmt(), payload.at("identifier").get<std::string>(),
                     parse_find_rule(payload.at("find").get<std::string>()));
    plan.work_units = static_cast<double>(concat_bytes(in).size());
    plan.note["path"] = winner.path;
    plan.writes.emplace_back(task_output_key(job, stage, 0, ordinal, total, "out"),
                             winner.bytes);
    plan.duration_ms = modelled_ms(ctx, "match", plan.work_units);
  } else if (kind == "map") {
    std::vector<std::string> inputs;
    for (const auto& k : payload.at("inputs")) inputs.push_back(k.get<std::string>());
    auto prefix = payload.at("map_table").get<std::string>();
    auto table_keys = ctx.store->list(prefix);
    std::vector<std::string> units;
    if (payload.at("directories").get<bool>()) {
      std::set<std::string> dirs;
      for (const auto& k : table_keys) {
        auto rest = k.substr(prefix.size());
        auto slash = rest.find('/');
        if (slash != std::string::npos)
          dirs.insert(prefix + rest.substr(0, slash) + "/");
      }
      units.assign(dirs.begin(), dirs.end());
    } else {
      units = table_keys;
    }
    auto pairs = map_pairs(inputs, units);
    int64_t n = static_cast<int64_t>(pairs.size());
    for (int64_t p = 0; p < n; p++) {
      json manifest;
      manifest["input"] = pairs[static_cast<size_t>(p)].input;
      manifest["table"] = pairs[static_cast<size_t>(p)].table;
      manifest["input_key"] = payload.at("input_key");
      manifest["table_key"] = payload.at("table_key");
      manifest["directories"] = payload.at("directories");
      plan.writes.emplace_back(task_output_key(job, stage, 0, p, n, "pair.json"),
                               manifest.dump());
    }
    plan.work_units = static_cast<double>(n);
    plan.duration_ms = modelled_ms(ctx, "map", plan.work_units);
  } else if (kind == "partition" || kind == "sort_partition") {
    auto in = read_inputs(ctx, payload);
    auto blob = concat_bytes(in);
    const auto& f = fmt();
    RangeSet rs;
    if (f.items(blob).empty() && kind == "sort_partition") {
      rs.mode = KeyMode::lex;
      rs.ranges.push_back(KeyRange{});
    } else {
      rs = partition_keys(blob, f, payload.at("identifier").get<std::string>(),
                          payload.at("ranges").get<int64_t>(),
                          payload.at("seed").get<uint64_t>(), ctx.sample_cap);
    }
    int64_t out_wave = payload.at("out_wave").get<int64_t>();
    plan.work_units = static_cast<double>(blob.size());
    plan.writes.emplace_back(
        task_output_key(job, stage, out_wave, 0, 1, "ranges.json"),
        rs.to_json().dump());
    plan.duration_ms = modelled_ms(ctx, "partition", plan.work_units);
  } else if (kind == "sort_scatter") {
    auto in = read_inputs(ctx, payload);
    const std::string& blob = in[0].second;
    auto rs = load_ranges(ctx, payload);
    auto buckets =
        scatter_blob(blob, fmt(), payload.at("identifier").get<std::string>(), rs);
    int64_t n = payload.at("range_count").get<int64_t>();
    int64_t k = payload.at("chunk_total").get<int64_t>();
    int64_t ci = payload.at("chunk_index").get<int64_t>();
    for (int64_t b = 0; b < n; b++)
      plan.writes.emplace_back(
          task_output_key(job, stage, 1, ci * n + b, k * n, "bucket"),
          std::move(buckets[static_cast<size_t>(b)]));
    plan.work_units = static_cast<double>(blob.size());
    plan.duration_ms = modelled_ms(ctx, "scatter", plan.work_units);
  } else if (kind == "sort_gather") {
    auto in = read_inputs(ctx, payload);
    auto blob = concat_bytes(in);
    auto rs = load_ranges(ctx, payload);
    auto bytes =
        sort_items(blob, fmt(), payload.at("identifier").get<std::string>(), rs.mode);
    int64_t n = payload.at("range_count").get<int64_t>();
    plan.work_units = static_cast<double>(blob.size());
    plan.writes.emplace_back(
        task_output_key(job, stage, 2, payload.at("bucket").get<int64_t>(), n, "sorted"),
        std::move(bytes));
    plan.duration_ms = modelled_ms(ctx, "sort_chunk", plan.work_units);
  } else if (kind == "run") {
    auto in = read_inputs(ctx, payload);
    KernelInput ki;
    ki.params = payload.value("app_params", json::object());
    ki.format = fmtname;
    ki.formats = ctx.formats;
    bool manifest_input = in.size() == 1;
    if (manifest_input) {
      auto pk = parse_output_key(in[0].first);
      manifest_input = pk && pk->name == "pair.json";
    }
    if (manifest_input) {
      auto manifest = json::parse(in[0].second);
      auto chunk_key = manifest.at("input").get<std::string>();
      auto chunk = ctx.store->get(chunk_key);
      std::string table_bytes;
      if (manifest.at("directories").get<bool>()) {
        for (const auto& k : ctx.store->list(manifest.at("table").get<std::string>()))
          table_bytes += ctx.store->get(k);
      } else {
        table_bytes = ctx.store->get(manifest.at("table").get<std::string>());
      }
      ki.bindings[manifest.at("input_key").get<std::string>()] = chunk;
      ki.bindings[manifest.at("table_key").get<std::string>()] = std::move(table_bytes);
      ki.inputs.emplace_back(chunk_key, std::move(chunk));
    } else {
      ki.inputs = std::move(in);
    }
    auto app = payload.at("application").get<std::string>();
    auto result = ctx.kernels->invoke(app, ki);
    for (auto& [name, bytes] : result.outputs)
      plan.writes.emplace_back(task_output_key(job, stage, 0, ordinal, total, name),
                               std::move(bytes));
    plan.work_units = result.work_units;
    plan.duration_ms = modelled_ms(ctx, "run:" + app, plan.work_units);
  } else {
    raise(Errc::malformed, "no task kind '" + kind + "'");
  }
  return plan;
}

}  // namespace flowlet
