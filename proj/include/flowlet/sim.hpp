#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowlet/pipeline.hpp"

namespace flowlet {

// Virtual-time event loop. Events at the same instant run in schedule order,
// so a (seed, workload) pair always replays the same way.
class SimEngine {
 public:
  int64_t now() const { return now_; }
  void schedule(int64_t at_ms, std::function<void()> fn);
  bool run_one();
  void run_until(int64_t t);
  void run_to_quiescence(int64_t max_events = -1);
  bool empty() const { return queue_.empty(); }
  int64_t next_time() const { return queue_.empty() ? -1 : queue_.top().at; }

 private:
  struct Event {
    int64_t at;
    uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.at != b.at) return a.at > b.at;
      return a.seq > b.seq;
    }
  };

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  int64_t now_ = 0;
  uint64_t seq_ = 0;
};

struct TraceRow {
  int64_t time_ms = 0;
  std::string event;
  std::string job;
  std::string stage;
  std::string task;
  std::string detail;
};

class TraceLog {
 public:
  void add(int64_t time_ms, std::string event, std::string job, std::string stage,
           std::string task, std::string detail);
  const std::vector<TraceRow>& rows() const { return rows_; }
  std::string to_csv() const;
  static std::vector<TraceRow> parse_csv(const std::string& text);

 private:
  std::vector<TraceRow> rows_;
};

struct ClusterModel {
  int64_t concurrency_limit = 1000;
  int64_t spawn_latency_ms = 50;
  int64_t function_timeout_s = 900;
  double failure_prob = 0.0;
  double straggler_prob = 0.0;
  double straggler_factor = 10.0;
  double cost_rate = 0.0000166667;  // per GB-second
  int64_t vcpus_per_function = 2;
  int64_t notification_latency_ms = 0;
  uint64_t rng_seed = 1;

  void validate() const;
  json to_json() const;
  static ClusterModel from_json(const json& doc);
};

struct CostRow {
  std::string job;
  std::string task;
  int64_t memory_mb = 0;
  int64_t billed_ms = 0;
  double gb_s = 0;
  double cost = 0;
};

class CostLedger {
 public:
  double bill(const std::string& job, const std::string& task, int64_t memory_mb,
              int64_t billed_ms, double rate);
  double total() const { return total_; }
  double job_total(const std::string& job) const;
  const std::vector<CostRow>& rows() const { return rows_; }

 private:
  std::vector<CostRow> rows_;
  std::map<std::string, double> per_job_;
  double total_ = 0;
};

enum class TaskEnd { ok, failed, timed_out };

struct TaskOutcomePlan {
  int64_t duration_ms = 1;  // before any straggler stretch
  std::vector<std::pair<std::string, std::string>> writes;
  double work_units = 0;
  json writes_note = json::object();  // recorded with the completion event
  json error = json::object();        // non-empty: the task body raised
};

struct TaskFinish {
  TaskEnd end = TaskEnd::ok;
  int64_t started_ms = 0;
  int64_t ended_ms = 0;
  int64_t billed_ms = 0;
  bool straggler = false;
  int attempt = 1;
};

struct Invocation {
  std::string job;
  int64_t stage = 0;
  std::string task;
  int attempt = 1;
  int64_t memory_mb = kDefaultMemoryMb;
  // Runs at function start; failures and stragglers are drawn afterwards, so
  // the plan's writes only land if the function ends cleanly.
  std::function<TaskOutcomePlan()> work;
  std::function<void(const TaskFinish&, TaskOutcomePlan&)> on_finish;
};

// Fixed-size function fleet. Invocations past the concurrency limit wait in
// an admission queue; each finish admits the next waiter. Failed functions
// hang until the platform timeout and are billed for all of it.
class FaasCluster {
 public:
  FaasCluster(SimEngine& sim, ClusterModel model, CostLedger& ledger, TraceLog& trace);

  void invoke(Invocation inv);
  int64_t active() const { return active_; }      // spawning + running
  int64_t queued() const { return static_cast<int64_t>(queue_.size()); }
  int64_t free_slots() const;
  const ClusterModel& model() const { return model_; }
  void set_finish_hook(std::function<void()> hook) { finish_hook_ = std::move(hook); }

 private:
  void start(Invocation inv);
  double draw01();

  SimEngine& sim_;
  ClusterModel model_;
  CostLedger& ledger_;
  TraceLog& trace_;
  std::mt19937_64 rng_;
  std::deque<Invocation> queue_;
  int64_t active_ = 0;
  std::function<void()> finish_hook_;
};

}  // namespace flowlet
