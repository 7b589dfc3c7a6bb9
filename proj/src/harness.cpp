#include "flowlet/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>

#include "flowlet/error.hpp"

namespace flowlet {

std::string synthetic_input(int64_t bytes, uint64_t seed) {
  if (bytes <= 0) raise(Errc::malformed, "input size must be positive");
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  static const char alphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789";
  std::string out;
  out.reserve(static_cast<size_t>(bytes) + 64);
  int64_t ord = 0;
  while (static_cast<int64_t>(out.size()) < bytes) {
    out += std::to_string(ord++);
    out += ' ';
    int len = 8 + static_cast<int>(rng() % 17);
    for (int i = 0; i < len; i++) out += alphabet[rng() % 36];
    out += '\n';
  }
  return out;
}

std::string aligned_prefix(const std::string& blob, int64_t max_bytes) {
  if (max_bytes <= 0) return blob;
  if (static_cast<int64_t>(blob.size()) <= max_bytes) return blob;
  auto cut = blob.rfind('\n', static_cast<size_t>(max_bytes) - 1);
  if (cut == std::string::npos) return blob;
  return blob.substr(0, cut + 1);
}

Runtime::Runtime(RuntimeOptions opt) : opt_(std::move(opt)) {
  opt_.config.validate();
  if (opt_.store_root.empty())
    store_ = std::make_unique<MemoryStore>();
  else
    store_ = std::make_unique<DiskStore>(opt_.store_root);
  if (opt_.log_path.empty())
    log_ = std::make_unique<ExecutionLog>();
  else
    log_ = std::make_unique<ExecutionLog>(ExecutionLog::open(opt_.log_path));
  cluster_ = std::make_unique<FaasCluster>(sim_, opt_.config.cluster, costs_, trace_);
  scheduler_ = std::make_unique<Scheduler>(opt_.config.policy);
  OrchestratorConfig oc;
  oc.monitor_interval_ms = opt_.config.monitor_interval_ms;
  oc.fault_tolerance = opt_.config.fault_tolerance;
  oc.max_attempts = opt_.config.max_attempts;
  orch_ = std::make_unique<Orchestrator>(sim_, *store_, *log_, *cluster_, *scheduler_,
                                         kernels_, formats_, opt_.config.durations, oc);
  wire();
}

void Runtime::wire() {
  auto live = orch_->liveness();
  int64_t lat = opt_.config.cluster.notification_latency_ms;
  SimEngine* sim = &sim_;
  store_->set_notifier([sim, live, lat](const std::string& key, int64_t) {
    int64_t at = sim->now() + lat;
    sim->schedule(at, [live, key, at]() {
      if (*live) (*live)->on_object_written(key, at);
    });
  });
  cluster_->set_finish_hook([live]() {
    if (*live) (*live)->pump();
  });
}

void Runtime::crash_controller() { orch_.reset(); }

void Runtime::restart_controller() {
  orch_.reset();
  scheduler_ = std::make_unique<Scheduler>(opt_.config.policy);
  OrchestratorConfig oc;
  oc.monitor_interval_ms = opt_.config.monitor_interval_ms;
  oc.fault_tolerance = opt_.config.fault_tolerance;
  oc.max_attempts = opt_.config.max_attempts;
  orch_ = std::make_unique<Orchestrator>(sim_, *store_, *log_, *cluster_, *scheduler_,
                                         kernels_, formats_, opt_.config.durations, oc);
  wire();
  orch_->recover();
}

void Runtime::drain(int64_t max_events) { sim_.run_to_quiescence(max_events); }

json RunReport::to_json() const {
  json doc;
  doc["job"] = job_id;
  doc["state"] = job_state_name(state);
  doc["seed"] = seed;
  doc["submitted_ms"] = submitted_ms;
  doc["finished_ms"] = finished_ms;
  doc["makespan_ms"] = makespan_ms;
  doc["tasks_completed"] = tasks_completed;
  doc["respawns"] = respawns;
  doc["cost"] = cost;
  doc["outputs"] = outputs;
  if (!sizing.is_null() && !sizing.empty()) doc["sizing"] = sizing;
  return doc;
}

namespace {

RunReport report_for(Runtime& rt, const std::string& id) {
  auto s = rt.orchestrator().summary(id);
  RunReport r;
  r.job_id = id;
  r.state = s.state;
  r.seed = rt.config().seed;
  r.submitted_ms = s.submitted_ms;
  r.finished_ms = s.finished_ms;
  r.makespan_ms = s.finished_ms >= 0 ? s.finished_ms - s.submitted_ms : -1;
  r.tasks_completed = s.tasks_completed;
  r.respawns = s.respawns;
  r.cost = rt.costs().job_total(id);
  r.outputs = s.outputs;
  return r;
}

int64_t pipeline_memory_mb(const CompiledPipeline& pipe) {
  int64_t mem = 0;
  for (size_t i = 0; i < pipe.stage_count(); i++)
    mem = std::max(mem, pipe.stage_memory_mb(i));
  return mem;
}

}  // namespace

RunReport run_job(Runtime& rt, const CompiledPipeline& pipe,
                  const std::string& input_key, const JobGoal& goal, int priority,
                  const std::map<int64_t, int64_t>& split_overrides) {
  JobSubmit js;
  js.pipeline = pipe;
  js.input_key = input_key;
  js.goal = goal;
  js.priority = priority;
  js.split_overrides = split_overrides;
  auto id = rt.orchestrator().submit(std::move(js));
  rt.drain();
  return report_for(rt, id);
}

RunReport run_job_sized(Runtime& rt, Provisioner& prov, const CompiledPipeline& pipe,
                        const std::string& input_key, const JobGoal& goal,
                        int priority) {
  auto unsized = pipe.unsized_stages();
  if (unsized.empty()) return run_job(rt, pipe, input_key, goal, priority);

  const auto& model = rt.cluster().model();
  int64_t input_bytes = rt.store().size_of(input_key);
  auto row = Provisioner::row_key(pipe.spec.name, input_bytes);
  auto grid = Provisioner::column_grid(unsized.size(), input_bytes,
                                       model.concurrency_limit);

  JobSubmit js;
  js.pipeline = pipe;
  js.input_key = input_key;
  js.goal = goal;
  js.priority = priority;
  js.deferred = true;
  auto id = rt.orchestrator().submit(std::move(js));

  std::string canary = aligned_prefix(rt.store().get(input_key),
                                      Provisioner::canary_bytes(input_bytes));
  auto canary_bytes = static_cast<int64_t>(canary.size());
  std::string canary_key =
      "sizing/" + pipe.spec.name + "/in" + std::to_string(canary_bytes);
  rt.store().try_put(canary_key, canary, rt.sim().now());

  json canary_runs = json::array();
  for (const auto& col : Provisioner::canary_columns(grid)) {
    if (prov.table().is_observed(row, col.id)) continue;
    std::map<int64_t, int64_t> ov;
    for (size_t p = 0; p < unsized.size(); p++)
      ov[static_cast<int64_t>(unsized[p])] = col.splits[p];
    JobSubmit cs;
    cs.pipeline = pipe;
    cs.input_key = canary_key;
    cs.internal = true;
    cs.split_overrides = ov;
    auto cid = rt.orchestrator().submit(std::move(cs));
    rt.drain();
    auto summ = rt.orchestrator().summary(cid);
    if (summ.state != JobState::done) continue;  // cell stays unobserved
    double mk_s =
        static_cast<double>(summ.finished_ms - summ.submitted_ms) / 1000.0;
    double scaled = Provisioner::scale_runtime(mk_s, canary_bytes, input_bytes);
    prov.record_run(row, col, scaled);
    canary_runs.push_back(json{{"job", cid},
                               {"column", col.id},
                               {"makespan_s", mk_s},
                               {"scaled_s", scaled}});
  }

  auto decision = prov.choose(row, goal, grid, input_bytes,
                              pipeline_memory_mb(pipe), model.cost_rate);
  std::map<int64_t, int64_t> chosen;
  for (size_t p = 0; p < unsized.size(); p++)
    chosen[static_cast<int64_t>(unsized[p])] = decision.column.splits[p];
  rt.orchestrator().start_deferred(id, chosen);
  rt.drain();

  auto rep = report_for(rt, id);
  int64_t started = rep.submitted_ms;
  auto resumes = rt.log().query(id, {}, LogEvent::resumed);
  if (!resumes.empty()) started = resumes.back()->at_ms;
  double actual_s = rep.finished_ms >= 0
                        ? static_cast<double>(rep.finished_ms - started) / 1000.0
                        : -1;
  if (rep.state == JobState::done && actual_s > 0)
    prov.record_run(row, decision.column, actual_s);

  json cols = json::array();
  for (const auto& c : grid) cols.push_back(c.id);
  rep.sizing = json{{"row", row},
                    {"grid", cols},
                    {"column", decision.column.id},
                    {"splits", decision.column.splits},
                    {"predicted_runtime_s", decision.predicted_runtime_s},
                    {"predicted_cost", decision.predicted_cost},
                    {"fallback", decision.fallback},
                    {"actual_runtime_s", actual_s},
                    {"canary_input_bytes", canary_bytes},
                    {"canaries", canary_runs}};
  return rep;
}

ColumnRunResult run_with_overrides(const RunConfig& cfg, const CompiledPipeline& pipe,
                                   const std::string& input_bytes,
                                   const std::map<int64_t, int64_t>& overrides) {
  RuntimeOptions opt;
  opt.config = cfg;
  Runtime rt(opt);
  rt.store().put("bench/input", input_bytes, 0);
  auto rep = run_job(rt, pipe, "bench/input", {}, 0, overrides);
  ColumnRunResult out;
  out.state = rep.state;
  out.makespan_ms = rep.makespan_ms;
  out.cost = rep.cost;
  out.respawns = rep.respawns;
  return out;
}

BenchResult run_bench(const RunConfig& cfg, const WorkloadSpec& wl,
                      const CompiledPipeline& pipe, bool with_vm_baseline) {
  BenchResult out;
  RuntimeOptions opt;
  opt.config = cfg;
  Runtime rt(opt);

  std::string input = synthetic_input(wl.job.input_bytes, cfg.seed);
  rt.store().put("bench/input", input, 0);

  auto arrivals = arrival_times(wl);
  size_t submitted = 0;
  for (size_t i = 0; i < arrivals.size(); i++) {
    rt.sim().schedule(arrivals[i], [&rt, &pipe, &wl, &submitted]() {
      JobSubmit js;
      js.pipeline = pipe;
      js.input_key = "bench/input";
      js.goal = wl.job.goal;
      js.priority = wl.job.priority;
      rt.orchestrator().submit(std::move(js));
      submitted++;
    });
  }

  // Incremental scan of the trace: a job with a live function is running,
  // an unsettled job without one is pending.
  size_t scanned = 0;
  std::map<std::string, int64_t> live;
  auto take_sample = [&]() {
    const auto& rows = rt.trace().rows();
    for (; scanned < rows.size(); scanned++) {
      const auto& r = rows[scanned];
      if (r.event == "start") live[r.job]++;
      else if (r.event == "complete" || r.event == "fail" || r.event == "timeout")
        live[r.job]--;
    }
    BenchSample s;
    s.time_ms = rt.sim().now();
    s.vcpus_in_use = rt.cluster().active() * rt.cluster().model().vcpus_per_function;
    for (const auto& id : rt.orchestrator().job_ids()) {
      auto st = rt.orchestrator().state(id);
      if (st == JobState::done || st == JobState::failed) continue;
      auto it = live.find(id);
      if (it != live.end() && it->second > 0)
        s.running_jobs++;
      else
        s.pending_jobs++;
    }
    s.cumulative_cost = rt.costs().total();
    out.samples.push_back(s);
  };

  std::function<void()> tick;
  tick = [&]() {
    take_sample();
    bool done = submitted == arrivals.size() && rt.orchestrator().all_settled();
    if (!done) rt.sim().schedule(rt.sim().now() + cfg.sample_interval_ms, tick);
  };
  rt.sim().schedule(0, tick);
  rt.drain();
  take_sample();

  double completion_sum = 0;
  int64_t completed = 0;
  for (const auto& id : rt.orchestrator().job_ids()) {
    auto s = rt.orchestrator().summary(id);
    if (s.internal) continue;
    BenchJobRecord r;
    r.id = s.id;
    r.arrival_ms = s.submitted_ms;
    r.finished_ms = s.finished_ms;
    r.state = s.state;
    r.cost = rt.costs().job_total(s.id);
    r.tasks_completed = s.tasks_completed;
    r.respawns = s.respawns;
    out.jobs.push_back(r);
    if (s.state == JobState::done) {
      completion_sum += static_cast<double>(s.finished_ms - s.submitted_ms) / 1000.0;
      completed++;
      out.finished_at_ms = std::max(out.finished_at_ms, s.finished_ms);
    }
  }
  out.total_cost = rt.costs().total();
  out.max_running_functions = max_concurrent_running(rt.trace().rows());
  out.mean_completion_s = completed ? completion_sum / static_cast<double>(completed) : 0;

  if (with_vm_baseline) {
    std::map<std::string, double> vcpu_seconds;
    for (const auto& row : rt.costs().rows())
      vcpu_seconds[row.job] += static_cast<double>(row.billed_ms) / 1000.0 *
                               static_cast<double>(cfg.cluster.vcpus_per_function);
    for (const auto& r : out.jobs) {
      VmJob vj;
      vj.id = r.id;
      vj.arrival_ms = r.arrival_ms;
      vj.vcpu_seconds = vcpu_seconds.count(r.id) ? vcpu_seconds[r.id] : 1.0;
      vj.vcpus = cfg.cluster.vcpus_per_function;
      out.vm_jobs.push_back(vj);
    }
    out.vm = run_vm_baseline(cfg.vm, out.vm_jobs, cfg.sample_interval_ms);
    double vm_sum = 0;
    int64_t vm_done = 0;
    for (const auto& c : out.vm->completions) {
      vm_sum += static_cast<double>(c.finished_ms - c.arrival_ms) / 1000.0;
      vm_done++;
    }
    out.vm_mean_completion_s = vm_done ? vm_sum / static_cast<double>(vm_done) : 0;
  }
  return out;
}

std::string bench_samples_csv(const std::vector<BenchSample>& samples) {
  std::string out = "time_ms,vcpus_in_use,running_jobs,pending_jobs,cumulative_cost\n";
  char buf[64];
  for (const auto& s : samples) {
    snprintf(buf, sizeof(buf), "%.9g", s.cumulative_cost);
    out += std::to_string(s.time_ms) + "," + std::to_string(s.vcpus_in_use) + "," +
           std::to_string(s.running_jobs) + "," + std::to_string(s.pending_jobs) +
           "," + buf + "\n";
  }
  return out;
}

std::string bench_jobs_csv(const std::vector<BenchJobRecord>& jobs) {
  std::string out = "job,arrival_ms,finished_ms,state,cost,tasks_completed,respawns\n";
  char buf[64];
  for (const auto& j : jobs) {
    snprintf(buf, sizeof(buf), "%.9g", j.cost);
    out += j.id + "," + std::to_string(j.arrival_ms) + "," +
           std::to_string(j.finished_ms) + "," + job_state_name(j.state) + "," + buf +
           "," + std::to_string(j.tasks_completed) + "," +
           std::to_string(j.respawns) + "\n";
  }
  return out;
}

std::string vm_samples_csv(const std::vector<VmSample>& samples) {
  std::string out =
      "time_ms,vms_up,vms_booting,queue_depth,running_jobs,utilization,cost_accrued\n";
  char util[64], cost[64];
  for (const auto& s : samples) {
    snprintf(util, sizeof(util), "%.9g", s.utilization);
    snprintf(cost, sizeof(cost), "%.9g", s.cost_accrued);
    out += std::to_string(s.time_ms) + "," + std::to_string(s.vms_up) + "," +
           std::to_string(s.vms_booting) + "," + std::to_string(s.queue_depth) + "," +
           std::to_string(s.running_jobs) + "," + util + "," + cost + "\n";
  }
  return out;
}

int64_t max_concurrent_running(const std::vector<TraceRow>& rows) {
  int64_t cur = 0, peak = 0;
  for (const auto& r : rows) {
    if (r.event == "start") {
      cur++;
      peak = std::max(peak, cur);
    } else if (r.event == "complete" || r.event == "fail" || r.event == "timeout") {
      cur--;
    }
  }
  return peak;
}

json stage_concurrency_timeline(const std::vector<TraceRow>& rows) {
  std::map<std::string, int64_t> running;
  json out = json::array();
  for (const auto& r : rows) {
    int delta = 0;
    if (r.event == "start") delta = 1;
    else if (r.event == "complete" || r.event == "fail" || r.event == "timeout")
      delta = -1;
    if (!delta) continue;
    running[r.stage] += delta;
    out.push_back(json{{"time_ms", r.time_ms},
                       {"stage", r.stage},
                       {"running", running[r.stage]}});
  }
  return out;
}

double trace_total_cost(const std::vector<TraceRow>& rows) {
  double total = 0;
  for (const auto& r : rows) {
    if (r.event != "complete" && r.event != "fail" && r.event != "timeout") continue;
    auto pos = r.detail.find("cost=");
    if (pos == std::string::npos) continue;
    total += std::strtod(r.detail.c_str() + pos + 5, nullptr);
  }
  return total;
}

int64_t trace_completed_tasks(const std::vector<TraceRow>& rows,
                              const std::string& job) {
  int64_t n = 0;
  for (const auto& r : rows)
    if (r.event == "complete" && r.job == job) n++;
  return n;
}

LocalRunResult run_local(const CompiledPipeline& pipe, const std::string& input_bytes,
                         const KernelRegistry& kernels, const FormatRegistry& formats,
                         ObjectStore* store,
                         const std::map<int64_t, int64_t>& split_overrides) {
  static const DurationModel kLocalDurations{};
  MemoryStore scratch;
  ObjectStore& st = store ? *store : scratch;
  TaskExecContext ctx;
  ctx.store = &st;
  ctx.kernels = &kernels;
  ctx.formats = &formats;
  ctx.durations = &kLocalDurations;

  LocalRunResult res;
  res.job_id = "local";
  const std::string input_key = "local-input/blob";
  st.try_put(input_key, input_bytes, 0);

  auto n = static_cast<int64_t>(pipe.stage_count());
  for (int64_t s = 0; s < n; s++) {
    int64_t waves = wave_count(pipe.spec.stages[static_cast<size_t>(s)].kind);
    for (int64_t w = 0; w < waves; w++) {
      auto payloads = generate_wave_payloads(ctx, pipe, res.job_id, s, w, input_key,
                                             split_overrides);
      for (const auto& p : payloads) {
        auto plan = execute_task_payload(ctx, pipe, p);
        for (auto& [key, bytes] : plan.writes) st.put(key, std::move(bytes), 0);
        res.tasks++;
      }
    }
  }

  int64_t last = n - 1;
  int64_t lw = wave_count(pipe.spec.stages[static_cast<size_t>(last)].kind) - 1;
  res.final_keys = st.list(res.job_id + "/s" + std::to_string(last) + "/w" +
                           std::to_string(lw) + "/");
  for (const auto& k : res.final_keys) res.outputs[k] = st.get(k);
  return res;
}

std::string strip_job_prefix(const std::string& key) {
  auto pos = key.find('/');
  return pos == std::string::npos ? key : key.substr(pos + 1);
}

}  // namespace flowlet
