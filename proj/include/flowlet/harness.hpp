#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flowlet/orchestrator.hpp"
#include "flowlet/provisioner.hpp"
#include "flowlet/runconfig.hpp"
#include "flowlet/vm_baseline.hpp"
#include "flowlet/workload.hpp"

namespace flowlet {

// Newline-delimited "<ordinal> <token>" records, deterministic in (bytes, seed).
std::string synthetic_input(int64_t bytes, uint64_t seed);
// Longest whole-record prefix within max_bytes; the whole blob when it has no
// newline inside the cap.
std::string aligned_prefix(const std::string& blob, int64_t max_bytes);

struct RuntimeOptions {
  RunConfig config;
  std::string store_root;  // empty: in-memory store
  std::string log_path;    // empty: in-memory log
};

// Owns one simulated deployment: event loop, store, log, cluster, scheduler,
// controller, and the wiring between them. The controller can be crashed and
// restarted while cloud-side state stays put.
class Runtime {
 public:
  explicit Runtime(RuntimeOptions opt);

  SimEngine& sim() { return sim_; }
  ObjectStore& store() { return *store_; }
  ExecutionLog& log() { return *log_; }
  FaasCluster& cluster() { return *cluster_; }
  Scheduler& scheduler() { return *scheduler_; }
  Orchestrator& orchestrator() { return *orch_; }
  TraceLog& trace() { return trace_; }
  CostLedger& costs() { return costs_; }
  KernelRegistry& kernels() { return kernels_; }
  const FormatRegistry& formats() const { return formats_; }
  const RunConfig& config() const { return opt_.config; }

  void crash_controller();
  void restart_controller();  // fresh scheduler + controller, then recover()
  void drain(int64_t max_events = 20'000'000);

 private:
  void wire();

  RuntimeOptions opt_;
  SimEngine sim_;
  TraceLog trace_;
  CostLedger costs_;
  KernelRegistry kernels_;
  FormatRegistry formats_;
  std::unique_ptr<ObjectStore> store_;
  std::unique_ptr<ExecutionLog> log_;
  std::unique_ptr<FaasCluster> cluster_;
  std::unique_ptr<Scheduler> scheduler_;
  std::unique_ptr<Orchestrator> orch_;
};

struct RunReport {
  std::string job_id;
  JobState state = JobState::queued;
  uint64_t seed = 0;
  int64_t submitted_ms = 0;
  int64_t finished_ms = -1;
  int64_t makespan_ms = -1;
  int64_t tasks_completed = 0;
  int64_t respawns = 0;
  double cost = 0;
  std::vector<std::string> outputs;
  json sizing;  // auto-sizing details when it ran

  json to_json() const;
};

// Submits one job on the runtime and drains the simulation.
RunReport run_job(Runtime& rt, const CompiledPipeline& pipe,
                  const std::string& input_key, const JobGoal& goal = {},
                  int priority = 0,
                  const std::map<int64_t, int64_t>& split_overrides = {});

// Sizing path for pipelines that leave split sizes open: the job is parked,
// canary prefixes run at probe configurations, the completed profile table
// picks the splits, and the full run's measured makespan feeds back into the
// table.
RunReport run_job_sized(Runtime& rt, Provisioner& prov, const CompiledPipeline& pipe,
                        const std::string& input_key, const JobGoal& goal,
                        int priority = 0);

// One fresh single-job simulation at pinned splits; used to score sizing
// choices against alternatives.
struct ColumnRunResult {
  JobState state = JobState::queued;
  int64_t makespan_ms = -1;
  double cost = 0;
  int64_t respawns = 0;
};
ColumnRunResult run_with_overrides(const RunConfig& cfg, const CompiledPipeline& pipe,
                                   const std::string& input_bytes,
                                   const std::map<int64_t, int64_t>& overrides);

struct BenchSample {
  int64_t time_ms = 0;
  int64_t vcpus_in_use = 0;
  int64_t running_jobs = 0;
  int64_t pending_jobs = 0;
  double cumulative_cost = 0;
};

struct BenchJobRecord {
  std::string id;
  int64_t arrival_ms = 0;
  int64_t finished_ms = -1;
  JobState state = JobState::queued;
  double cost = 0;
  int64_t tasks_completed = 0;
  int64_t respawns = 0;
};

struct BenchResult {
  std::vector<BenchSample> samples;
  std::vector<BenchJobRecord> jobs;
  double total_cost = 0;
  int64_t finished_at_ms = 0;
  int64_t max_running_functions = 0;
  double mean_completion_s = 0;
  std::optional<VmRunResult> vm;
  std::vector<VmJob> vm_jobs;
  double vm_mean_completion_s = 0;
};

// Replays the workload's arrivals on one runtime, sampling fleet state on a
// fixed grid; optionally replays the same jobs against the VM autoscaler.
BenchResult run_bench(const RunConfig& cfg, const WorkloadSpec& wl,
                      const CompiledPipeline& pipe, bool with_vm_baseline);

std::string bench_samples_csv(const std::vector<BenchSample>& samples);
std::string bench_jobs_csv(const std::vector<BenchJobRecord>& jobs);
std::string vm_samples_csv(const std::vector<VmSample>& samples);

// Trace post-processing. Running functions count "start" rows open until
// their complete/fail/timeout row.
int64_t max_concurrent_running(const std::vector<TraceRow>& rows);
json stage_concurrency_timeline(const std::vector<TraceRow>& rows);
double trace_total_cost(const std::vector<TraceRow>& rows);
int64_t trace_completed_tasks(const std::vector<TraceRow>& rows, const std::string& job);

// Serial in-process execution of a pipeline, no simulator involved.
struct LocalRunResult {
  std::string job_id;
  int64_t tasks = 0;
  std::vector<std::string> final_keys;
  std::map<std::string, std::string> outputs;  // final key -> bytes
};
LocalRunResult run_local(const CompiledPipeline& pipe, const std::string& input_bytes,
                         const KernelRegistry& kernels, const FormatRegistry& formats,
                         ObjectStore* store = nullptr,
                         const std::map<int64_t, int64_t>& split_overrides = {});

// "<job>/rest" -> "rest"; used to compare outputs across modes.
std::string strip_job_prefix(const std::string& key);

}  // namespace flowlet
