#include "flowlet/orchestrator.hpp"

#include <algorithm>
#include <cctype>

#include "flowlet/error.hpp"

namespace flowlet {

json JobGoal::to_json() const {
  switch (kind) {
    case Kind::best_effort: return json{{"kind", "best_effort"}};
    case Kind::deadline: return json{{"kind", "deadline"}, {"value", value}};
    case Kind::cost_cap: return json{{"kind", "cost_cap"}, {"value", value}};
  }
  return json{{"kind", "best_effort"}};
}

JobGoal JobGoal::from_json(const json& doc) {
  JobGoal g;
  auto kind = doc.value("kind", std::string("best_effort"));
  if (kind == "best_effort") {
    g.kind = Kind::best_effort;
  } else if (kind == "deadline") {
    g.kind = Kind::deadline;
    g.value = doc.at("value").get<double>();
  } else if (kind == "cost_cap") {
    g.kind = Kind::cost_cap;
    g.value = doc.at("value").get<double>();
  } else {
    raise(Errc::malformed, "no goal kind '" + kind + "'");
  }
  if (g.kind != Kind::best_effort && g.value <= 0)
    raise(Errc::malformed, "goal value must be positive");
  return g;
}

const char* job_state_name(JobState s) {
  switch (s) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::paused: return "paused";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
  }
  return "queued";
}

json JobSummary::to_json() const {
  json doc;
  doc["id"] = id;
  doc["pipeline"] = pipeline;
  doc["state"] = job_state_name(state);
  doc["internal"] = internal;
  doc["submitted_ms"] = submitted_ms;
  doc["finished_ms"] = finished_ms;
  doc["tasks_completed"] = tasks_completed;
  doc["respawns"] = respawns;
  doc["outputs"] = outputs;
  return doc;
}

Orchestrator::Orchestrator(SimEngine& sim, ObjectStore& store, ExecutionLog& log,
                           FaasCluster& cluster, Scheduler& scheduler,
                           const KernelRegistry& kernels,
                           const FormatRegistry& formats,
                           const DurationModel& durations, OrchestratorConfig config)
    : sim_(sim), store_(store), log_(log), cluster_(cluster), scheduler_(scheduler),
      config_(config) {
  ctx_.store = &store_;
  ctx_.kernels = &kernels;
  ctx_.formats = &formats;
  ctx_.durations = &durations;
  ctx_.sample_cap = config_.partition_sample_cap;
  self_ = std::make_shared<Orchestrator*>(this);
}

Orchestrator::JobRec& Orchestrator::rec(const std::string& job) {
  auto it = jobs_.find(job);
  if (it == jobs_.end()) raise(Errc::unknown_job, job);
  return it->second;
}

const Orchestrator::JobRec& Orchestrator::rec(const std::string& job) const {
  auto it = jobs_.find(job);
  if (it == jobs_.end()) raise(Errc::unknown_job, job);
  return it->second;
}

std::string Orchestrator::submit(JobSubmit submit) {
  if (!store_.exists(submit.input_key))
    raise(Errc::input_missing, submit.input_key);
  std::string id = submit.job_id.empty() ? "j" + std::to_string(next_job_++)
                                         : submit.job_id;
  if (jobs_.count(id)) raise(Errc::bad_state, "job id in use: " + id);

  JobRec jr;
  jr.id = id;
  jr.pipeline = std::make_shared<CompiledPipeline>(std::move(submit.pipeline));
  jr.input_key = submit.input_key;
  jr.goal = submit.goal;
  jr.priority = submit.priority;
  jr.internal = submit.internal;
  jr.split_overrides = submit.split_overrides;
  if (submit.pause_after_stage) jr.pause_after = *submit.pause_after_stage;
  jr.submit_ms = sim_.now();

  json payload;
  payload["pipeline"] = jr.pipeline->to_json();
  payload["input"] = jr.input_key;
  payload["goal"] = jr.goal.to_json();
  payload["priority"] = jr.priority;
  payload["internal"] = jr.internal;
  if (submit.pause_after_stage) payload["pause_after"] = *submit.pause_after_stage;
  if (!jr.split_overrides.empty()) {
    json so = json::object();
    for (auto [s, v] : jr.split_overrides) so[std::to_string(s)] = v;
    payload["split_overrides"] = so;
  }

  scheduler_.register_job(id, jr.priority);
  auto [it, ok] = jobs_.emplace(id, std::move(jr));
  order_.push_back(id);
  log_.append(LogEntry{sim_.now(), id, -1, "", LogEvent::submitted, payload});

  if (submit.deferred) {
    it->second.state = JobState::paused;
    it->second.pause_after = -1;
    it->second.pending_stage = 0;
    log_.append(LogEntry{sim_.now(), id, -1, "", LogEvent::paused,
                         json{{"awaiting", "sizing"}}});
    return id;
  }
  fire_wave(it->second, 0, 0);
  arm_monitor();
  pump();
  return id;
}

void Orchestrator::fire_wave(JobRec& job, int64_t stage, int64_t wave) {
  std::vector<json> payloads;
  try {
    payloads = generate_wave_payloads(ctx_, *job.pipeline, job.id, stage, wave,
                                      job.input_key, job.split_overrides);
  } catch (const Error& e) {
    fail_job(job, e);
    return;
  }
  for (auto& p : payloads) {
    auto task = p.at("task").get<std::string>();
    if (log_.has(job.id, stage, task, LogEvent::completed)) continue;
    auto ti = job.tasks.find(task);
    if (ti != job.tasks.end() && ti->second.outstanding) continue;
    enqueue_payload(job, p, ti == job.tasks.end() ? 1 : ti->second.attempts + 1);
  }
}

void Orchestrator::enqueue_payload(JobRec& job, const json& payload, int attempt) {
  auto task = payload.at("task").get<std::string>();
  auto& ti = job.tasks[task];
  ti.payload = payload;
  ti.outstanding = true;
  ti.dispatched_ms = -1;
  ReadyTask rt;
  rt.job = job.id;
  rt.stage = payload.at("stage").get<int64_t>();
  rt.task = task;
  rt.attempt = attempt;
  rt.payload = payload;
  scheduler_.enqueue(std::move(rt));
}

void Orchestrator::pump() {
  if (pumping_) return;
  pumping_ = true;
  while (true) {
    int64_t budget = cluster_.free_slots();
    if (budget <= 0) break;
    auto res = scheduler_.dispatch(budget);
    for (const auto& j : res.pause) {
      auto& jr = rec(j);
      if (jr.state == JobState::running || jr.state == JobState::queued) {
        jr.held = true;
        jr.state = JobState::paused;
        scheduler_.set_held(j, true);
        log_.append(LogEntry{sim_.now(), j, -1, "", LogEvent::paused,
                             json{{"hold", "all"}, {"by", "scheduler"}}});
      }
    }
    if (res.tasks.empty()) break;
    for (auto& t : res.tasks) dispatch_task(t);
  }
  pumping_ = false;
}

void Orchestrator::dispatch_task(const ReadyTask& task) {
  auto it = jobs_.find(task.job);
  if (it == jobs_.end()) return;
  JobRec& jr = it->second;
  if (jr.state == JobState::done || jr.state == JobState::failed) return;
  if (jr.state == JobState::queued) jr.state = JobState::running;
  auto& ti = jr.tasks[task.task];
  ti.attempts = task.attempt;
  ti.dispatched_ms = sim_.now();
  arm_monitor();
  if (task.attempt == 1)
    log_.append(LogEntry{sim_.now(), task.job, task.stage, task.task,
                         LogEvent::invoked, task.payload});

  Invocation inv;
  inv.job = task.job;
  inv.stage = task.stage;
  inv.task = task.task;
  inv.attempt = task.attempt;
  inv.memory_mb = jr.pipeline->stage_memory_mb(static_cast<size_t>(task.stage));

  auto ctx = ctx_;
  auto pipeline = jr.pipeline;
  auto payload = task.payload;
  inv.work = [ctx, pipeline, payload]() {
    TaskOutcomePlan plan;
    try {
      TaskPlan tp = execute_task_payload(ctx, *pipeline, payload);
      plan.duration_ms = tp.duration_ms;
      plan.writes = std::move(tp.writes);
      plan.work_units = tp.work_units;
      if (!tp.note.empty()) plan.writes_note = tp.note;
    } catch (const Error& e) {
      plan.error = json{{"code", errc_name(e.code())}, {"detail", e.what()}};
    }
    return plan;
  };

  ObjectStore* store = &store_;
  ExecutionLog* log = &log_;
  auto live = self_;
  SimEngine* sim = &sim_;
  std::string jid = task.job, tid = task.task;
  int64_t stage = task.stage;
  int attempt = task.attempt;
  inv.on_finish = [store, log, live, sim, jid, tid, stage, attempt](
                      const TaskFinish& fin, TaskOutcomePlan& plan) {
    if (fin.end != TaskEnd::ok) return;  // the monitor deals with lost tasks
    if (!plan.error.empty()) {
      log->append(LogEntry{sim->now(), jid, stage, tid, LogEvent::failed, plan.error});
      if (*live) (*live)->on_task_error(jid, tid);
      return;
    }
    json note = plan.writes_note;
    note["attempt"] = attempt;
    if (!log->append_if_new(
            LogEntry{sim->now(), jid, stage, tid, LogEvent::completed, note}))
      return;  // a respawned attempt already committed; drop these writes
    for (auto& [key, bytes] : plan.writes)
      store->try_put(key, std::move(bytes), sim->now());
    if (*live) (*live)->on_task_completed(jid, tid);
  };
  cluster_.invoke(std::move(inv));
}

void Orchestrator::on_task_completed(const std::string& job, const std::string& task) {
  auto it = jobs_.find(job);
  if (it == jobs_.end()) return;
  auto& ti = it->second.tasks[task];
  if (!ti.completed) {
    ti.completed = true;
    ti.outstanding = false;
    it->second.completed_tasks++;
  }
}

void Orchestrator::on_task_error(const std::string& job, const std::string& task) {
  auto it = jobs_.find(job);
  if (it == jobs_.end()) return;
  JobRec& jr = it->second;
  if (jr.state == JobState::done || jr.state == JobState::failed) return;
  jr.tasks[task].outstanding = false;
  settle(jr, JobState::failed, json{{"task", task}});
}

void Orchestrator::on_object_written(const std::string& key, int64_t) {
  auto pk = parse_output_key(key);
  if (!pk) return;
  auto it = jobs_.find(pk->job);
  if (it == jobs_.end()) return;
  JobRec& jr = it->second;
  if (jr.state == JobState::done || jr.state == JobState::failed) return;
  auto& ws = jr.waves[{pk->stage, pk->wave}];
  ws.seen.insert(pk->ordinal);
  ws.total = pk->total;
  if (!ws.advanced && static_cast<int64_t>(ws.seen.size()) == ws.total) {
    ws.advanced = true;
    advance_from(jr, pk->stage, pk->wave);
  }
  pump();
}

void Orchestrator::advance_from(JobRec& job, int64_t stage, int64_t wave) {
  auto kind = job.pipeline->spec.stages[static_cast<size_t>(stage)].kind;
  if (wave + 1 < wave_count(kind)) {
    fire_wave(job, stage, wave + 1);
    return;
  }
  stage_done(job, stage);
}

void Orchestrator::stage_done(JobRec& job, int64_t stage) {
  int64_t next = stage + 1;
  if (next >= static_cast<int64_t>(job.pipeline->stage_count())) {
    settle(job, JobState::done);
    return;
  }
  if (job.pause_after != -2 && next > job.pause_after) {
    job.pending_stage = next;
    if (job.state != JobState::paused) {
      job.state = JobState::paused;
      log_.append(LogEntry{sim_.now(), job.id, -1, "", LogEvent::paused,
                           json{{"after_stage", job.pause_after}}});
    }
    return;
  }
  fire_wave(job, next, 0);
}

void Orchestrator::pause(const std::string& job, std::optional<int64_t> after_stage) {
  JobRec& jr = rec(job);
  if (jr.state == JobState::done || jr.state == JobState::failed)
    raise(Errc::bad_state, "cannot pause settled job " + job);
  if (after_stage) {
    jr.pause_after = *after_stage;
    return;  // the gate logs `paused` when it actually stops the job
  }
  if (jr.state == JobState::paused) raise(Errc::bad_state, job + " already paused");
  jr.held = true;
  jr.state = JobState::paused;
  scheduler_.set_held(job, true);
  log_.append(LogEntry{sim_.now(), job, -1, "", LogEvent::paused, json{{"hold", "all"}}});
}

void Orchestrator::resume(const std::string& job) {
  JobRec& jr = rec(job);
  if (jr.state != JobState::paused)
    raise(Errc::bad_state, job + " is not paused");
  log_.append(LogEntry{sim_.now(), job, -1, "", LogEvent::resumed, json::object()});
  jr.state = JobState::running;
  if (jr.held) {
    jr.held = false;
    scheduler_.set_held(job, false);
  }
  jr.pause_after = -2;
  if (jr.pending_stage >= 0) {
    int64_t s = jr.pending_stage;
    jr.pending_stage = -1;
    fire_wave(jr, s, 0);
  }
  arm_monitor();
  pump();
}

void Orchestrator::start_deferred(const std::string& job,
                                  const std::map<int64_t, int64_t>& split_overrides) {
  JobRec& jr = rec(job);
  if (jr.state != JobState::paused || jr.pause_after != -1)
    raise(Errc::bad_state, job + " is not awaiting sizing");
  json so = json::object();
  for (auto [s, v] : split_overrides) so[std::to_string(s)] = v;
  log_.append(LogEntry{sim_.now(), job, -1, "", LogEvent::resumed,
                       json{{"split_overrides", so}}});
  jr.split_overrides = split_overrides;
  jr.state = JobState::running;
  jr.pause_after = -2;
  if (jr.pending_stage >= 0) {
    int64_t s = jr.pending_stage;
    jr.pending_stage = -1;
    fire_wave(jr, s, 0);
  }
  arm_monitor();
  pump();
}

JobState Orchestrator::state(const std::string& job) const { return rec(job).state; }

JobSummary Orchestrator::summary(const std::string& job) const {
  const JobRec& jr = rec(job);
  JobSummary s;
  s.id = jr.id;
  s.pipeline = jr.pipeline->spec.name;
  s.state = jr.state;
  s.internal = jr.internal;
  s.submitted_ms = jr.submit_ms;
  s.finished_ms = jr.finish_ms;
  s.tasks_completed = jr.completed_tasks;
  s.respawns = jr.respawns;
  if (jr.state == JobState::done) {
    int64_t last = static_cast<int64_t>(jr.pipeline->stage_count()) - 1;
    int64_t lw = wave_count(jr.pipeline->spec.stages[static_cast<size_t>(last)].kind) - 1;
    s.outputs = store_.list(jr.id + "/s" + std::to_string(last) + "/w" +
                            std::to_string(lw) + "/");
  }
  return s;
}

std::vector<std::string> Orchestrator::job_ids() const { return order_; }

bool Orchestrator::all_settled() const {
  for (const auto& [id, jr] : jobs_)
    if (jr.state != JobState::done && jr.state != JobState::failed) return false;
  return true;
}

void Orchestrator::settle(JobRec& job, JobState state, const json& why) {
  if (job.state == JobState::done || job.state == JobState::failed) return;
  job.state = state;
  job.finish_ms = sim_.now();
  log_.append(LogEntry{sim_.now(), job.id, -1, "",
                       state == JobState::done ? LogEvent::done : LogEvent::failed,
                       why});
  scheduler_.job_done(job.id);
  for (const auto& r : scheduler_.take_resumes()) {
    auto& jr = rec(r);
    if (jr.state == JobState::paused && jr.held) resume(r);
  }
  if (on_settled_) on_settled_(job.id, state);
}

void Orchestrator::fail_job(JobRec& job, const Error& err) {
  settle(job, JobState::failed,
         json{{"error", errc_name(err.code())}, {"detail", err.what()}});
}

void Orchestrator::arm_monitor() {
  if (monitor_armed_) return;
  monitor_armed_ = true;
  auto live = self_;
  sim_.schedule(sim_.now() + config_.monitor_interval_ms, [live]() {
    if (*live) (*live)->monitor_tick();
  });
}

void Orchestrator::monitor_tick() {
  monitor_armed_ = false;
  int64_t now = sim_.now();
  for (auto& [id, jr] : jobs_) {
    if (jr.state == JobState::done || jr.state == JobState::failed) continue;
    int64_t timeout_ms = jr.pipeline->spec.timeout_s * 1000;
    for (auto& [task, ti] : jr.tasks) {
      if (!ti.outstanding || ti.completed || ti.dispatched_ms < 0) continue;
      // A commit may have landed while this controller was down.
      if (log_.has(id, ti.payload.at("stage").get<int64_t>(), task,
                   LogEvent::completed)) {
        ti.completed = true;
        ti.outstanding = false;
        jr.completed_tasks++;
        continue;
      }
      if (now <= ti.dispatched_ms + timeout_ms) continue;
      if (!config_.fault_tolerance) {
        // No respawns: a lost task can never complete, so the job is dead.
        settle(jr, JobState::failed, json{{"task", task}, {"error", "timeout"}});
        break;
      }
      if (ti.attempts >= config_.max_attempts) {
        settle(jr, JobState::failed,
               json{{"task", task}, {"error", "max_attempts"}});
        break;
      }
      int attempt = ti.attempts + 1;
      log_.append(LogEntry{now, id, ti.payload.at("stage").get<int64_t>(), task,
                           LogEvent::respawned,
                           json{{"attempt", attempt}, {"payload", ti.payload}}});
      jr.respawns++;
      ti.dispatched_ms = -1;
      ReadyTask rt;
      rt.job = id;
      rt.stage = ti.payload.at("stage").get<int64_t>();
      rt.task = task;
      rt.attempt = attempt;
      rt.payload = ti.payload;
      scheduler_.enqueue(std::move(rt));
    }
  }
  pump();
  if (work_in_flight()) arm_monitor();
}

bool Orchestrator::work_in_flight() const {
  for (const auto& [id, jr] : jobs_) {
    if (jr.state == JobState::done || jr.state == JobState::failed) continue;
    for (const auto& [task, ti] : jr.tasks)
      if (ti.outstanding && !ti.completed && ti.dispatched_ms >= 0) return true;
  }
  return false;
}

void Orchestrator::set_on_job_settled(
    std::function<void(const std::string&, JobState)> fn) {
  on_settled_ = std::move(fn);
}

void Orchestrator::recover() {
  for (const auto& e : log_.entries()) {
    switch (e.event) {
      case LogEvent::submitted: {
        JobRec jr;
        jr.id = e.job;
        jr.pipeline = std::make_shared<CompiledPipeline>(
            load_pipeline(e.payload.at("pipeline").dump()));
        jr.input_key = e.payload.at("input").get<std::string>();
        jr.goal = JobGoal::from_json(e.payload.value("goal", json::object()));
        jr.priority = e.payload.value("priority", 0);
        jr.internal = e.payload.value("internal", false);
        if (e.payload.contains("pause_after"))
          jr.pause_after = e.payload["pause_after"].get<int64_t>();
        if (e.payload.contains("split_overrides"))
          for (auto it = e.payload["split_overrides"].begin();
               it != e.payload["split_overrides"].end(); ++it)
            jr.split_overrides[std::stoll(it.key())] = it.value().get<int64_t>();
        jr.submit_ms = e.at_ms;
        jr.state = JobState::queued;
        scheduler_.register_job(e.job, jr.priority);
        next_job_ = std::max<int64_t>(next_job_, parse_job_number(e.job) + 1);
        jobs_.emplace(e.job, std::move(jr));
        order_.push_back(e.job);
        break;
      }
      case LogEvent::invoked: {
        auto& ti = jobs_.at(e.job).tasks[e.task];
        ti.payload = e.payload;
        ti.attempts = std::max(ti.attempts, 1);
        ti.dispatched_ms = e.at_ms;
        ti.outstanding = true;
        break;
      }
      case LogEvent::respawned: {
        auto& jr = jobs_.at(e.job);
        auto& ti = jr.tasks[e.task];
        ti.payload = e.payload.at("payload");
        ti.attempts = e.payload.at("attempt").get<int>();
        ti.dispatched_ms = e.at_ms;
        ti.outstanding = true;
        jr.respawns++;
        break;
      }
      case LogEvent::completed: {
        auto& jr = jobs_.at(e.job);
        auto& ti = jr.tasks[e.task];
        if (!ti.completed) {
          ti.completed = true;
          ti.outstanding = false;
          jr.completed_tasks++;
        }
        break;
      }
      case LogEvent::failed:
      case LogEvent::done: {
        auto& jr = jobs_.at(e.job);
        jr.state = e.event == LogEvent::done ? JobState::done : JobState::failed;
        jr.finish_ms = e.at_ms;
        scheduler_.job_done(e.job);
        scheduler_.take_resumes();
        break;
      }
      case LogEvent::paused: {
        auto& jr = jobs_.at(e.job);
        jr.state = JobState::paused;
        if (e.payload.contains("after_stage")) {
          jr.pause_after = e.payload["after_stage"].get<int64_t>();
        } else if (e.payload.value("awaiting", "") == "sizing") {
          jr.pause_after = -1;
        } else {
          jr.held = true;
          scheduler_.set_held(e.job, true);
        }
        break;
      }
      case LogEvent::resumed: {
        auto& jr = jobs_.at(e.job);
        jr.state = JobState::running;
        if (jr.held) {
          jr.held = false;
          scheduler_.set_held(e.job, false);
        }
        if (e.payload.contains("split_overrides"))
          for (auto it = e.payload["split_overrides"].begin();
               it != e.payload["split_overrides"].end(); ++it)
            jr.split_overrides[std::stoll(it.key())] = it.value().get<int64_t>();
        jr.pause_after = -2;
        break;
      }
    }
  }

  for (auto& id : order_) {
    JobRec& jr = jobs_.at(id);
    if (jr.state == JobState::done || jr.state == JobState::failed) continue;
    for (const auto& key : store_.list(id + "/")) {
      auto pk = parse_output_key(key);
      if (!pk) continue;
      auto& ws = jr.waves[{pk->stage, pk->wave}];
      ws.seen.insert(pk->ordinal);
      ws.total = pk->total;
    }
    int64_t stages = static_cast<int64_t>(jr.pipeline->stage_count());
    int64_t s = 0;
    bool blocked = false;
    while (s < stages) {
      auto kind = jr.pipeline->spec.stages[static_cast<size_t>(s)].kind;
      for (int64_t w = 0; w < wave_count(kind); w++) {
        auto& ws = jr.waves[{s, w}];
        bool complete = ws.total >= 0 &&
                        static_cast<int64_t>(ws.seen.size()) == ws.total;
        if (complete) {
          ws.advanced = true;
          continue;
        }
        if (jr.pause_after != -2 && s > jr.pause_after) {
          jr.pending_stage = s;
        } else {
          fire_wave(jr, s, w);
        }
        blocked = true;
        break;
      }
      if (blocked) break;
      s++;
    }
    if (!blocked) settle(jr, JobState::done);
  }
  arm_monitor();
  pump();
}

int64_t Orchestrator::parse_job_number(const std::string& id) {
  if (id.size() < 2 || id[0] != 'j') return 0;
  for (size_t i = 1; i < id.size(); i++)
    if (!isdigit(static_cast<unsigned char>(id[i]))) return 0;
  return std::stoll(id.substr(1));
}

}  // namespace flowlet
