#include "flowlet/scheduler.hpp"

#include <algorithm>

#include "flowlet/error.hpp"

namespace flowlet {

const char* policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::fifo: return "fifo";
    case PolicyKind::round_robin: return "round_robin";
    case PolicyKind::priority: return "priority";
  }
  return "fifo";
}

PolicyKind parse_policy(const std::string& name) {
  if (name == "fifo") return PolicyKind::fifo;
  if (name == "round_robin" || name == "rr") return PolicyKind::round_robin;
  if (name == "priority") return PolicyKind::priority;
  raise(Errc::malformed, "no scheduling policy '" + name + "'");
}

void Scheduler::register_job(const std::string& job, int priority) {
  if (jobs_.count(job)) raise(Errc::bad_state, "job already registered: " + job);
  JobQueue jq;
  jq.job_seq = next_job_seq_++;
  jq.priority = priority;
  jobs_.emplace(job, std::move(jq));
  order_.push_back(job);
}

void Scheduler::job_done(const std::string& job) {
  auto it = jobs_.find(job);
  if (it == jobs_.end()) raise(Errc::unknown_job, job);
  it->second.done = true;
  it->second.queue.clear();
  auto pf = paused_for_.find(job);
  if (pf != paused_for_.end()) {
    for (const auto& p : pf->second) {
      auto pit = jobs_.find(p);
      if (pit != jobs_.end() && !pit->second.done)
        pending_resumes_.push_back(p);
    }
    paused_for_.erase(pf);
  }
}

std::vector<std::string> Scheduler::take_resumes() {
  auto out = std::move(pending_resumes_);
  pending_resumes_.clear();
  return out;
}

void Scheduler::set_held(const std::string& job, bool held) {
  auto it = jobs_.find(job);
  if (it == jobs_.end()) raise(Errc::unknown_job, job);
  it->second.held = held;
}

void Scheduler::enqueue(ReadyTask task) {
  auto it = jobs_.find(task.job);
  if (it == jobs_.end() || it->second.done)
    raise(Errc::unknown_job, "enqueue for " + task.job);
  task.seq = next_seq_++;
  it->second.queue.push_back(std::move(task));
}

size_t Scheduler::ready_count() const {
  size_t n = 0;
  for (const auto& [name, jq] : jobs_) n += jq.queue.size();
  return n;
}

size_t Scheduler::ready_count(const std::string& job) const {
  auto it = jobs_.find(job);
  return it == jobs_.end() ? 0 : it->second.queue.size();
}

void Scheduler::serve_round_robin(std::vector<std::string>& names, size_t& cursor,
                                  int64_t& budget, std::vector<ReadyTask>& out) {
  if (names.empty()) return;
  size_t misses = 0;
  while (budget > 0 && misses < names.size()) {
    auto& jq = jobs_.at(names[cursor % names.size()]);
    cursor = (cursor + 1) % names.size();
    if (!eligible(jq) || jq.queue.empty()) {
      misses++;
      continue;
    }
    misses = 0;
    out.push_back(std::move(jq.queue.front()));
    jq.queue.pop_front();
    budget--;
  }
}

DispatchResult Scheduler::dispatch(int64_t budget) {
  DispatchResult result;
  if (budget <= 0) return result;

  if (kind_ == PolicyKind::fifo) {
    for (const auto& name : order_) {
      auto& jq = jobs_.at(name);
      if (!eligible(jq)) continue;
      while (budget > 0 && !jq.queue.empty()) {
        result.tasks.push_back(std::move(jq.queue.front()));
        jq.queue.pop_front();
        budget--;
      }
      if (budget == 0) break;
    }
    return result;
  }

  if (kind_ == PolicyKind::round_robin) {
    serve_round_robin(order_, rr_cursor_, budget, result.tasks);
    return result;
  }

  // Priority: serve classes from the highest down, round-robin within each.
  std::map<int, std::vector<std::string>, std::greater<int>> classes;
  for (const auto& name : order_) {
    auto& jq = jobs_.at(name);
    if (eligible(jq) && !jq.queue.empty()) classes[jq.priority].push_back(name);
  }
  for (auto& [prio, names] : classes) {
    if (budget <= 0) break;
    serve_round_robin(names, class_cursor_[prio], budget, result.tasks);
  }

  if (budget <= 0) {
    // Starved high-priority work: ask for every active lower-priority job to
    // be held until the starved job finishes.
    int top = 0;
    std::string top_job;
    for (const auto& name : order_) {
      auto& jq = jobs_.at(name);
      if (eligible(jq) && !jq.queue.empty() &&
          (top_job.empty() || jq.priority > top)) {
        top = jq.priority;
        top_job = name;
      }
    }
    if (!top_job.empty()) {
      for (const auto& name : order_) {
        auto& jq = jobs_.at(name);
        if (name != top_job && !jq.done && !jq.held && jq.priority < top) {
          result.pause.push_back(name);
          paused_for_[top_job].push_back(name);
        }
      }
    }
  }
  return result;
}

}  // namespace flowlet
