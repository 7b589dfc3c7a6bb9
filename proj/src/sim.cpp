#include "flowlet/sim.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "flowlet/error.hpp"

namespace flowlet {

void SimEngine::schedule(int64_t at_ms, std::function<void()> fn) {
  if (at_ms < now_)
    raise(Errc::bad_state, "cannot schedule into the past");
  queue_.push(Event{at_ms, seq_++, std::move(fn)});
}

bool SimEngine::run_one() {
  if (queue_.empty()) return false;
  // std::priority_queue::top is const; the handler may schedule, so move out
  // via a copy of the callable first.
  Event ev = queue_.top();
  queue_.pop();
  now_ = ev.at;
  ev.fn();
  return true;
}

void SimEngine::run_until(int64_t t) {
  while (!queue_.empty() && queue_.top().at <= t) run_one();
  if (now_ < t) now_ = t;
}

void SimEngine::run_to_quiescence(int64_t max_events) {
  int64_t n = 0;
  while (run_one()) {
    n++;
    if (max_events >= 0 && n >= max_events)
      raise(Errc::bad_state, "event budget exhausted; simulation did not settle");
  }
}

void TraceLog::add(int64_t time_ms, std::string event, std::string job,
                   std::string stage, std::string task, std::string detail) {
  rows_.push_back(TraceRow{time_ms, std::move(event), std::move(job),
                           std::move(stage), std::move(task), std::move(detail)});
}

std::string TraceLog::to_csv() const {
  std::string out = "time_ms,event,job,stage,task,detail\n";
  for (const auto& r : rows_) {
    out += std::to_string(r.time_ms);
    for (const std::string* f : {&r.event, &r.job, &r.stage, &r.task, &r.detail}) {
      out += ',';
      for (char c : *f) out += (c == ',' || c == '\n') ? ';' : c;
    }
    out += '\n';
  }
  return out;
}

std::vector<TraceRow> TraceLog::parse_csv(const std::string& text) {
  std::vector<TraceRow> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::array<std::string, 6> cols;
    size_t col = 0, pos = 0;
    while (col < 5) {
      size_t c = line.find(',', pos);
      if (c == std::string::npos) raise(Errc::malformed, "trace row: " + line);
      cols[col++] = line.substr(pos, c - pos);
      pos = c + 1;
    }
    cols[5] = line.substr(pos);
    rows.push_back(TraceRow{std::stoll(cols[0]), cols[1], cols[2], cols[3], cols[4],
                            cols[5]});
  }
  return rows;
}

void ClusterModel::validate() const {
  if (concurrency_limit <= 0) raise(Errc::malformed, "concurrency_limit must be positive");
  if (spawn_latency_ms < 0) raise(Errc::malformed, "spawn_latency_ms must be >= 0");
  if (function_timeout_s <= 0) raise(Errc::malformed, "function_timeout_s must be positive");
  if (failure_prob < 0 || failure_prob >= 1)
    raise(Errc::malformed, "failure_prob must be in [0,1)");
  if (straggler_prob < 0 || straggler_prob >= 1)
    raise(Errc::malformed, "straggler_prob must be in [0,1)");
  if (straggler_factor < 1) raise(Errc::malformed, "straggler_factor must be >= 1");
  if (cost_rate < 0) raise(Errc::malformed, "cost_rate must be >= 0");
  if (vcpus_per_function <= 0) raise(Errc::malformed, "vcpus_per_function must be positive");
  if (notification_latency_ms < 0)
    raise(Errc::malformed, "notification_latency_ms must be >= 0");
}

json ClusterModel::to_json() const {
  return json{{"concurrency_limit", concurrency_limit},
              {"spawn_latency_ms", spawn_latency_ms},
              {"function_timeout_s", function_timeout_s},
              {"failure_prob", failure_prob},
              {"straggler_prob", straggler_prob},
              {"straggler_factor", straggler_factor},
              {"cost_rate", cost_rate},
              {"vcpus_per_function", vcpus_per_function},
              {"notification_latency_ms", notification_latency_ms},
              {"rng_seed", rng_seed}};
}

ClusterModel ClusterModel::from_json(const json& doc) {
  ClusterModel m;
  if (!doc.is_object()) raise(Errc::malformed, "cluster config must be an object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const auto& k = it.key();
    const auto& v = it.value();
    if (k == "concurrency_limit") m.concurrency_limit = v.get<int64_t>();
    else if (k == "spawn_latency_ms") m.spawn_latency_ms = v.get<int64_t>();
    else if (k == "function_timeout_s") m.function_timeout_s = v.get<int64_t>();
    else if (k == "failure_prob") m.failure_prob = v.get<double>();
    else if (k == "straggler_prob") m.straggler_prob = v.get<double>();
    else if (k == "straggler_factor") m.straggler_factor = v.get<double>();
    else if (k == "cost_rate") m.cost_rate = v.get<double>();
    else if (k == "vcpus_per_function") m.vcpus_per_function = v.get<int64_t>();
    else if (k == "notification_latency_ms") m.notification_latency_ms = v.get<int64_t>();
    else if (k == "rng_seed") m.rng_seed = v.get<uint64_t>();
    else raise(Errc::unknown_param, "cluster config does not take '" + k + "'");
  }
  m.validate();
  return m;
}

double CostLedger::bill(const std::string& job, const std::string& task,
                        int64_t memory_mb, int64_t billed_ms, double rate) {
  billed_ms = std::max<int64_t>(1, billed_ms);
  double gb_s = (static_cast<double>(memory_mb) / 1024.0) *
                (static_cast<double>(billed_ms) / 1000.0);
  double cost = gb_s * rate;
  rows_.push_back(CostRow{job, task, memory_mb, billed_ms, gb_s, cost});
  per_job_[job] += cost;
  total_ += cost;
  return cost;
}

double CostLedger::job_total(const std::string& job) const {
  auto it = per_job_.find(job);
  return it == per_job_.end() ? 0.0 : it->second;
}

FaasCluster::FaasCluster(SimEngine& sim, ClusterModel model, CostLedger& ledger,
                         TraceLog& trace)
    : sim_(sim), model_(std::move(model)), ledger_(ledger), trace_(trace),
      rng_(model_.rng_seed) {
  model_.validate();
}

double FaasCluster::draw01() {
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

int64_t FaasCluster::free_slots() const {
  return model_.concurrency_limit - active_ - static_cast<int64_t>(queue_.size());
}

void FaasCluster::invoke(Invocation inv) {
  trace_.add(sim_.now(), "invoke", inv.job, "s" + std::to_string(inv.stage), inv.task,
             "attempt=" + std::to_string(inv.attempt));
  if (active_ < model_.concurrency_limit) {
    active_++;
    auto shared = std::make_shared<Invocation>(std::move(inv));
    sim_.schedule(sim_.now() + model_.spawn_latency_ms,
                  [this, shared]() { start(std::move(*shared)); });
  } else {
    trace_.add(sim_.now(), "queue", inv.job, "s" + std::to_string(inv.stage), inv.task,
               "depth=" + std::to_string(queue_.size() + 1));
    queue_.push_back(std::move(inv));
  }
}

void FaasCluster::start(Invocation inv) {
  int64_t started = sim_.now();
  trace_.add(started, "start", inv.job, "s" + std::to_string(inv.stage), inv.task,
             "attempt=" + std::to_string(inv.attempt));
  auto plan = std::make_shared<TaskOutcomePlan>(inv.work ? inv.work()
                                                         : TaskOutcomePlan{});
  bool fails = draw01() < model_.failure_prob;
  bool straggles = draw01() < model_.straggler_prob;
  int64_t timeout_ms = model_.function_timeout_s * 1000;
  int64_t duration = std::max<int64_t>(1, plan->duration_ms);
  if (straggles)
    duration = std::max<int64_t>(
        1, llround(static_cast<double>(duration) * model_.straggler_factor));

  TaskFinish fin;
  fin.started_ms = started;
  fin.straggler = straggles;
  fin.attempt = inv.attempt;
  if (fails) {
    fin.end = TaskEnd::failed;
    fin.billed_ms = timeout_ms;
  } else if (duration >= timeout_ms) {
    fin.end = TaskEnd::timed_out;
    fin.billed_ms = timeout_ms;
  } else {
    fin.end = TaskEnd::ok;
    fin.billed_ms = duration;
  }
  fin.ended_ms = started + fin.billed_ms;

  auto shared = std::make_shared<Invocation>(std::move(inv));
  sim_.schedule(fin.ended_ms, [this, shared, plan, fin]() {
    const char* kind = fin.end == TaskEnd::ok ? "complete"
                       : fin.end == TaskEnd::failed ? "fail"
                                                    : "timeout";
    double cost = ledger_.bill(shared->job, shared->task, shared->memory_mb,
                               fin.billed_ms, model_.cost_rate);
    char detail[160];
    snprintf(detail, sizeof(detail), "attempt=%d;billed_ms=%lld;cost=%.9g%s",
             fin.attempt, static_cast<long long>(fin.billed_ms), cost,
             fin.straggler ? ";straggler" : "");
    trace_.add(sim_.now(), kind, shared->job, "s" + std::to_string(shared->stage),
               shared->task, detail);
    active_--;
    if (shared->on_finish) shared->on_finish(fin, *plan);
    if (!queue_.empty() && active_ < model_.concurrency_limit) {
      active_++;
      auto next = std::make_shared<Invocation>(std::move(queue_.front()));
      queue_.pop_front();
      sim_.schedule(sim_.now() + model_.spawn_latency_ms,
                    [this, next]() { start(std::move(*next)); });
    }
    if (finish_hook_) finish_hook_();
  });
}

}  // namespace flowlet
