#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flowlet/error.hpp"
#include "flowlet/harness.hpp"
#include "flowlet/pipeline.hpp"
#include "flowlet/provisioner.hpp"
#include "flowlet/runconfig.hpp"

namespace fs = std::filesystem;
using namespace flowlet;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::not_found, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::bad_state, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    raise(Errc::malformed, what + ": " + e.what());
  }
}

// Flat pipeline spec: the compiled schema minus stage ids and triggers.
PipelineSpec parse_spec_file(const json& doc) {
  if (!doc.is_object()) raise(Errc::malformed, "spec must be a JSON object");
  PipelineSpec s;
  for (const char* req : {"name", "table", "log", "timeout"})
    if (!doc.contains(req)) raise(Errc::malformed, std::string("spec missing ") + req);
  s.name = doc.at("name").get<std::string>();
  s.table = doc.at("table").get<std::string>();
  s.log = doc.at("log").get<std::string>();
  s.timeout_s = doc.at("timeout").get<int64_t>();
  if (doc.contains("config")) s.config = FunctionConfig::from_json(doc.at("config"));
  s.input_format = doc.value("input_format", "");
  if (doc.contains("stages")) {
    if (!doc.at("stages").is_array()) raise(Errc::malformed, "stages must be an array");
    for (const auto& st : doc.at("stages")) {
      StageSpec spec;
      spec.kind = parse_stage_kind(st.at("kind").get<std::string>());
      spec.params = st.value("params", json::object());
      if (st.contains("config")) spec.config = FunctionConfig::from_json(st.at("config"));
      s.stages.push_back(std::move(spec));
    }
  }
  return s;
}

JobGoal parse_goal(const std::string& text) {
  JobGoal g;
  if (text.empty() || text == "best_effort") return g;
  auto colon = text.find(':');
  std::string kind = text.substr(0, colon);
  if (kind == "deadline")
    g.kind = JobGoal::Kind::deadline;
  else if (kind == "cost_cap")
    g.kind = JobGoal::Kind::cost_cap;
  else
    raise(Errc::malformed, "unknown goal: " + text);
  if (colon == std::string::npos)
    raise(Errc::malformed, "goal needs a value: " + text);
  try {
    g.value = std::stod(text.substr(colon + 1));
  } catch (const std::exception&) {
    raise(Errc::malformed, "bad goal value: " + text);
  }
  if (g.value <= 0) raise(Errc::malformed, "goal value must be positive");
  return g;
}

void stage_extra_objects(ObjectStore& store, const std::vector<std::string>& puts) {
  for (const auto& spec : puts) {
    auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
      raise(Errc::malformed, "--put wants key=file, got " + spec);
    store.try_put(spec.substr(0, eq), read_file(spec.substr(eq + 1)), 0);
  }
}

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  uint64_t seed = 0;
  bool seed_set = false;
  std::string scheduler;
  bool no_fault_tolerance = false;
};

RunConfig resolve_config(const CommonFlags& f) {
  RunConfig cfg = f.config_path.empty() ? RunConfig{} : load_run_config(f.config_path);
  if (f.seed_set) {
    cfg.seed = f.seed;
    cfg.cluster.rng_seed = f.seed;
  }
  if (!f.scheduler.empty()) cfg.policy = parse_policy(f.scheduler);
  if (f.no_fault_tolerance) cfg.fault_tolerance = false;
  if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
  if (cfg.out_dir.empty()) cfg.out_dir = default_out_dir();
  cfg.validate();
  return cfg;
}

int cmd_compile(const std::string& spec_path, std::string out_path) {
  auto spec = parse_spec_file(parse_json(read_file(spec_path), spec_path));
  auto compiled = compile(spec);
  if (out_path.empty())
    out_path = (fs::path(spec_path).parent_path() /
                (fs::path(spec_path).stem().string() + ".json"))
                   .string();
  write_file(out_path, compiled.to_bytes());
  std::cout << out_path << "\n";
  return 0;
}

int cmd_run(const std::string& pipeline_path, const std::string& input_path,
            const CommonFlags& flags, const std::string& goal_text,
            const std::vector<std::string>& puts, bool resume, bool no_sizing) {
  RunConfig cfg = resolve_config(flags);
  auto pipe = load_pipeline(read_file(pipeline_path));
  JobGoal goal = parse_goal(goal_text);

  fs::path out(cfg.out_dir);
  fs::create_directories(out);
  fs::path log_path = out / "log.jsonl";
  if (fs::exists(log_path) && !resume)
    raise(Errc::bad_state, cfg.out_dir +
                               " already holds a run; pass --resume to continue it "
                               "or use a fresh --out");

  RuntimeOptions opt;
  opt.config = cfg;
  opt.store_root = (out / "store").string();
  opt.log_path = log_path.string();
  Runtime rt(opt);
  stage_extra_objects(rt.store(), puts);

  json summary;
  int exit_code = 0;
  if (resume) {
    rt.orchestrator().recover();
    rt.drain();
    json jobs = json::array();
    for (const auto& id : rt.orchestrator().job_ids()) {
      auto s = rt.orchestrator().summary(id);
      jobs.push_back(s.to_json());
      if (s.state != JobState::done && !s.internal) exit_code = 3;
    }
    summary["resumed_jobs"] = jobs;
  } else {
    std::string input_key = "input/" + fs::path(input_path).filename().string();
    rt.store().try_put(input_key, read_file(input_path), 0);

    RunReport rep;
    if (!pipe.unsized_stages().empty() && !no_sizing) {
      Provisioner prov;
      if (!cfg.profile_csv.empty() && fs::exists(cfg.profile_csv))
        prov.table() = ProfileTable::from_csv(read_file(cfg.profile_csv));
      rep = run_job_sized(rt, prov, pipe, input_key, goal);
      if (!cfg.profile_csv.empty()) write_file(cfg.profile_csv, prov.table().to_csv());
    } else {
      rep = run_job(rt, pipe, input_key, goal);
    }
    summary = rep.to_json();
    if (rep.state != JobState::done) exit_code = 3;
  }

  summary["config"] = cfg.to_json();
  summary["stage_timeline"] = stage_concurrency_timeline(rt.trace().rows());
  write_file(out / "trace.csv", rt.trace().to_csv());
  write_file(out / "summary.json", summary.dump(2) + "\n");
  std::cout << (out / "summary.json").string() << "\n";
  return exit_code;
}

int cmd_bench(const CommonFlags& flags, const std::string& workload_path,
              const std::string& baseline) {
  RunConfig cfg = resolve_config(flags);
  std::optional<WorkloadSpec> wl = cfg.workload;
  if (!workload_path.empty())
    wl = WorkloadSpec::from_json(parse_json(read_file(workload_path), workload_path));
  if (!wl) raise(Errc::missing_param, "bench needs a workload (config or --workload)");
  if (wl->job.pipeline.empty())
    raise(Errc::missing_param, "workload job template needs a pipeline path");

  std::string ppath = wl->job.pipeline;
  if (!fs::exists(ppath) && !workload_path.empty()) {
    auto beside = fs::path(workload_path).parent_path() / ppath;
    if (fs::exists(beside)) ppath = beside.string();
  }
  auto pipe = load_pipeline(read_file(ppath));

  bool with_vm = baseline == "vm";
  auto res = run_bench(cfg, *wl, pipe, with_vm);

  fs::path out(cfg.out_dir);
  write_file(out / "bench_serverless.csv", bench_samples_csv(res.samples));
  write_file(out / "bench_jobs.csv", bench_jobs_csv(res.jobs));
  if (res.vm) write_file(out / "bench_vm.csv", vm_samples_csv(res.vm->samples));

  json summary;
  summary["workload"] = wl->to_json();
  summary["seed"] = cfg.seed;
  summary["jobs"] = res.jobs.size();
  summary["total_cost"] = res.total_cost;
  summary["finished_at_ms"] = res.finished_at_ms;
  summary["max_running_functions"] = res.max_running_functions;
  summary["mean_completion_s"] = res.mean_completion_s;
  if (res.vm) {
    summary["vm_mean_completion_s"] = res.vm_mean_completion_s;
    summary["vm_total_cost"] = res.vm->total_cost;
  }
  write_file(out / "bench_summary.json", summary.dump(2) + "\n");
  std::cout << (out / "bench_summary.json").string() << "\n";
  return 0;
}

int cmd_test_local(const std::string& pipeline_path, const std::string& input_path,
                   const CommonFlags& flags, const std::vector<std::string>& puts) {
  RunConfig cfg = resolve_config(flags);
  auto pipe = load_pipeline(read_file(pipeline_path));

  MemoryStore store;
  stage_extra_objects(store, puts);
  KernelRegistry kernels;
  FormatRegistry formats;
  auto res = run_local(pipe, read_file(input_path), kernels, formats, &store);

  fs::path out(cfg.out_dir);
  json summary;
  summary["job"] = res.job_id;
  summary["tasks"] = res.tasks;
  summary["final_keys"] = res.final_keys;
  for (const auto& [key, bytes] : res.outputs)
    write_file(out / "outputs" / DiskStore::encode_key(strip_job_prefix(key)), bytes);
  write_file(out / "local_summary.json", summary.dump(2) + "\n");
  std::cout << (out / "local_summary.json").string() << "\n";
  return 0;
}

int cmd_report(const std::string& dir) {
  fs::path out(dir);
  auto summary = parse_json(read_file((out / "summary.json").string()), "summary.json");
  auto rows = TraceLog::parse_csv(read_file((out / "trace.csv").string()));

  bool consistent = true;
  std::ostringstream rep;
  rep << "run report: " << dir << "\n";
  rep << "  max_running_functions: " << max_concurrent_running(rows) << "\n";
  double trace_cost = trace_total_cost(rows);
  auto check = [&](const std::string& name, double recorded, double derived) {
    bool ok = std::abs(recorded - derived) <= 1e-6 * std::max(1.0, std::abs(recorded));
    if (!ok) consistent = false;
    rep << "  " << name << ": recorded=" << recorded << " trace=" << derived
        << (ok ? "" : "  MISMATCH") << "\n";
  };
  if (summary.contains("job")) {
    auto job = summary.at("job").get<std::string>();
    rep << "  job: " << job << "  state: " << summary.value("state", "?") << "\n";
    rep << "  seed: " << summary.value("seed", uint64_t{0}) << "\n";
    rep << "  makespan_ms: " << summary.value("makespan_ms", int64_t{-1}) << "\n";
    check("tasks_completed",
          static_cast<double>(summary.value("tasks_completed", int64_t{0})),
          static_cast<double>(trace_completed_tasks(rows, job)));
    check("cost", summary.value("cost", 0.0), trace_total_cost(rows));
  } else {
    rep << "  total trace cost: " << trace_cost << "\n";
  }
  std::cout << rep.str();
  return consistent ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"declarative serverless dataflow simulator"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string spec_path, out_path, pipeline_path, input_path, goal_text;
  std::string workload_path, baseline, report_dir;
  std::vector<std::string> puts;
  bool resume = false, no_sizing = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config,-c", flags.config_path, "run config JSON");
    cmd->add_option("--out,-o", flags.out_dir, "output directory");
    cmd->add_option("--seed", flags.seed, "RNG seed override")
        ->each([&](const std::string&) { flags.seed_set = true; });
    cmd->add_option("--scheduler", flags.scheduler, "fifo | round_robin | priority");
    cmd->add_flag("--no-fault-tolerance", flags.no_fault_tolerance,
                  "disable straggler respawns");
  };

  auto* compile_cmd = app.add_subcommand("compile", "compile a pipeline spec to JSON");
  compile_cmd->add_option("spec", spec_path, "pipeline spec file")->required();
  compile_cmd->add_option("--out,-o", out_path, "output file");

  auto* run_cmd = app.add_subcommand("run", "run a pipeline on the simulator");
  run_cmd->add_option("pipeline", pipeline_path, "compiled pipeline JSON")->required();
  run_cmd->add_option("input", input_path, "input file")->required();
  run_cmd->add_option("--goal", goal_text, "best_effort | deadline:S | cost_cap:USD");
  run_cmd->add_option("--put", puts, "stage extra objects, key=file");
  run_cmd->add_flag("--resume", resume, "recover an interrupted run in --out");
  run_cmd->add_flag("--no-sizing", no_sizing, "skip auto-sizing of open split sizes");
  add_common(run_cmd);

  auto* bench_cmd = app.add_subcommand("bench", "replay a workload and sample the fleet");
  bench_cmd->add_option("--workload,-w", workload_path, "workload spec JSON");
  bench_cmd->add_option("--baseline", baseline, "also run a baseline: vm");
  add_common(bench_cmd);

  auto* local_cmd = app.add_subcommand("test-local", "run a pipeline serially in-process");
  local_cmd->add_option("pipeline", pipeline_path, "compiled pipeline JSON")->required();
  local_cmd->add_option("input", input_path, "input file")->required();
  local_cmd->add_option("--put", puts, "stage extra objects, key=file");
  add_common(local_cmd);

  auto* report_cmd = app.add_subcommand("report", "re-derive aggregates from a run dir");
  report_cmd->add_option("dir", report_dir, "run output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (compile_cmd->parsed()) return cmd_compile(spec_path, out_path);
    if (run_cmd->parsed())
      return cmd_run(pipeline_path, input_path, flags, goal_text, puts, resume,
                     no_sizing);
    if (bench_cmd->parsed()) return cmd_bench(flags, workload_path, baseline);
    if (local_cmd->parsed()) return cmd_test_local(pipeline_path, input_path, flags, puts);
    if (report_cmd->parsed()) return cmd_report(report_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << errc_name(e.code()) << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
