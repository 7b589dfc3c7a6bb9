#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flowlet/error.hpp"
#include "flowlet/exec.hpp"
#include "flowlet/log.hpp"
#include "flowlet/scheduler.hpp"
#include "flowlet/sim.hpp"

namespace flowlet {

struct JobGoal {
  enum class Kind { best_effort, deadline, cost_cap };
  Kind kind = Kind::best_effort;
  double value = 0;  // seconds for deadline, currency for cost_cap

  json to_json() const;
  static JobGoal from_json(const json& doc);
};

enum class JobState { queued, running, paused, done, failed };
const char* job_state_name(JobState s);

struct JobSubmit {
  CompiledPipeline pipeline;
  std::string input_key;
  JobGoal goal;
  int priority = 0;
  std::optional<int64_t> pause_after_stage;
  std::map<int64_t, int64_t> split_overrides;  // stage -> split_size
  std::string job_id;                          // generated when empty
  bool internal = false;                       // probe runs, hidden from reports
  // Submitted but not started; start_deferred launches it once sizing picked
  // its split sizes.
  bool deferred = false;
};

struct JobSummary {
  std::string id;
  std::string pipeline;
  JobState state = JobState::queued;
  bool internal = false;
  int64_t submitted_ms = 0;
  int64_t finished_ms = -1;
  int64_t tasks_completed = 0;
  int64_t respawns = 0;
  std::vector<std::string> outputs;

  json to_json() const;
};

struct OrchestratorConfig {
  int64_t monitor_interval_ms = 1000;
  bool fault_tolerance = true;
  int max_attempts = 20;
  int64_t partition_sample_cap = 10000;
};

// Event-driven controller: object-store write notifications advance stage
// barriers, a periodic monitor respawns tasks that outlive their stage
// timeout, and a scheduling policy meters dispatch into the cluster.
class Orchestrator {
 public:
  Orchestrator(SimEngine& sim, ObjectStore& store, ExecutionLog& log,
               FaasCluster& cluster, Scheduler& scheduler,
               const KernelRegistry& kernels, const FormatRegistry& formats,
               const DurationModel& durations, OrchestratorConfig config = {});
  ~Orchestrator() { *self_ = nullptr; }
  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  std::string submit(JobSubmit submit);  // InputMissing
  void pause(const std::string& job, std::optional<int64_t> after_stage = {});
  void resume(const std::string& job);
  // Launches a deferred job with the split sizes sizing settled on.
  void start_deferred(const std::string& job,
                      const std::map<int64_t, int64_t>& split_overrides);
  JobState state(const std::string& job) const;  // UnknownJob
  JobSummary summary(const std::string& job) const;
  std::vector<std::string> job_ids() const;
  bool all_settled() const;

  // Wire these to the store notifier and cluster finish hook.
  void on_object_written(const std::string& key, int64_t at_ms);
  void pump();

  // Rebuilds every job from the persisted log and store listing; in-flight
  // work noted in the log is left to finish, everything else is re-enqueued.
  void recover();

  void set_on_job_settled(std::function<void(const std::string&, JobState)> fn);
  const OrchestratorConfig& config() const { return config_; }
  const TaskExecContext& exec_context() const { return ctx_; }

  // Cloud-side completion callbacks report back through these when the
  // controller is up.
  void on_task_completed(const std::string& job, const std::string& task);
  void on_task_error(const std::string& job, const std::string& task);

 private:
  struct TaskInfo {
    json payload;
    int attempts = 0;
    bool outstanding = false;
    bool completed = false;
    int64_t dispatched_ms = -1;
  };
  struct WaveState {
    std::set<int64_t> seen;
    int64_t total = -1;
    bool advanced = false;
  };
  struct JobRec {
    std::string id;
    std::shared_ptr<const CompiledPipeline> pipeline;
    std::string input_key;
    JobGoal goal;
    int priority = 0;
    bool internal = false;
    std::map<int64_t, int64_t> split_overrides;
    int64_t pause_after = -2;  // -2: none
    bool held = false;
    JobState state = JobState::queued;
    int64_t submit_ms = 0;
    int64_t finish_ms = -1;
    int64_t pending_stage = -1;
    std::map<std::pair<int64_t, int64_t>, WaveState> waves;
    std::map<std::string, TaskInfo> tasks;
    int64_t respawns = 0;
    int64_t completed_tasks = 0;
  };

  JobRec& rec(const std::string& job);
  const JobRec& rec(const std::string& job) const;
  void fire_wave(JobRec& job, int64_t stage, int64_t wave);
  void enqueue_payload(JobRec& job, const json& payload, int attempt);
  void dispatch_task(const ReadyTask& task);
  void advance_from(JobRec& job, int64_t stage, int64_t wave);
  void stage_done(JobRec& job, int64_t stage);
  void settle(JobRec& job, JobState state, const json& why = json::object());
  void monitor_tick();
  void arm_monitor();
  bool work_in_flight() const;
  void fail_job(JobRec& job, const Error& err);
  static int64_t parse_job_number(const std::string& id);

  SimEngine& sim_;
  ObjectStore& store_;
  ExecutionLog& log_;
  FaasCluster& cluster_;
  Scheduler& scheduler_;
  TaskExecContext ctx_;
  OrchestratorConfig config_;
  std::map<std::string, JobRec> jobs_;
  std::vector<std::string> order_;
  int64_t next_job_ = 1;
  bool monitor_armed_ = false;
  bool pumping_ = false;
  std::function<void(const std::string&, JobState)> on_settled_;
  // Shared liveness flag: cloud-side callbacks scheduled before a crash
  // check it before touching the controller.
  std::shared_ptr<Orchestrator*> self_;

 public:
  std::shared_ptr<Orchestrator*> liveness() { return self_; }
};

}  // namespace flowlet
