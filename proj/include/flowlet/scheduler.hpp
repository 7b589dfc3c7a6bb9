#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace flowlet {

using json = nlohmann::json;

enum class PolicyKind { fifo, round_robin, priority };

const char* policy_name(PolicyKind kind);
PolicyKind parse_policy(const std::string& name);

struct ReadyTask {
  std::string job;
  int64_t stage = 0;
  std::string task;
  int attempt = 1;
  json payload;  // opaque to the scheduler
  uint64_t seq = 0;
};

struct DispatchResult {
  std::vector<ReadyTask> tasks;
  // Jobs the priority policy wants held because higher-priority work is
  // starved for slots. The orchestrator acts on these and confirms via
  // set_held.
  std::vector<std::string> pause;
};

// Owns per-job ready queues. FIFO serves whole jobs in submission order,
// round-robin hands one task per job per cycle, priority serves the highest
// class first (round-robin inside a class).
class Scheduler {
 public:
  explicit Scheduler(PolicyKind kind) : kind_(kind) {}

  void register_job(const std::string& job, int priority);
  void job_done(const std::string& job);
  // Jobs paused on behalf of a now-finished high-priority job; cleared on
  // read.
  std::vector<std::string> take_resumes();
  void set_held(const std::string& job, bool held);
  void enqueue(ReadyTask task);  // UnknownJob for unregistered or done jobs
  DispatchResult dispatch(int64_t budget);
  size_t ready_count() const;
  size_t ready_count(const std::string& job) const;
  PolicyKind kind() const { return kind_; }

 private:
  struct JobQueue {
    uint64_t job_seq = 0;
    int priority = 0;
    bool held = false;
    bool done = false;
    std::deque<ReadyTask> queue;
  };

  bool eligible(const JobQueue& jq) const { return !jq.held && !jq.done; }
  void serve_round_robin(std::vector<std::string>& names, size_t& cursor,
                         int64_t& budget, std::vector<ReadyTask>& out);

  PolicyKind kind_;
  std::map<std::string, JobQueue> jobs_;
  std::vector<std::string> order_;  // by registration
  size_t rr_cursor_ = 0;
  std::map<int, size_t> class_cursor_;
  uint64_t next_seq_ = 0;
  uint64_t next_job_seq_ = 0;
  std::map<std::string, std::vector<std::string>> paused_for_;
  std::vector<std::string> pending_resumes_;
};

}  // namespace flowlet
