#include "flowlet/log.hpp"

#include "flowlet/error.hpp"

namespace flowlet {

const char* log_event_name(LogEvent e) {
  switch (e) {
    case LogEvent::submitted: return "submitted";
    case LogEvent::invoked: return "invoked";
    case LogEvent::completed: return "completed";
    case LogEvent::respawned: return "respawned";
    case LogEvent::paused: return "paused";
    case LogEvent::resumed: return "resumed";
    case LogEvent::done: return "done";
    case LogEvent::failed: return "failed";
  }
  return "submitted";
}

LogEvent parse_log_event(const std::string& name) {
  static const std::pair<const char*, LogEvent> table[] = {
      {"submitted", LogEvent::submitted}, {"invoked", LogEvent::invoked},
      {"completed", LogEvent::completed}, {"respawned", LogEvent::respawned},
      {"paused", LogEvent::paused},       {"resumed", LogEvent::resumed},
      {"done", LogEvent::done},           {"failed", LogEvent::failed}};
  for (auto& [n, e] : table)
    if (name == n) return e;
  raise(Errc::malformed, "no log event '" + name + "'");
}

json LogEntry::to_json() const {
  json doc;
  doc["at"] = at_ms;
  doc["event"] = log_event_name(event);
  doc["job"] = job;
  if (stage >= 0) doc["stage"] = stage;
  if (!task.empty()) doc["task"] = task;
  if (!payload.empty()) doc["payload"] = payload;
  return doc;
}

LogEntry LogEntry::from_json(const json& doc) {
  LogEntry e;
  e.at_ms = doc.at("at").get<int64_t>();
  e.event = parse_log_event(doc.at("event").get<std::string>());
  e.job = doc.at("job").get<std::string>();
  e.stage = doc.value("stage", int64_t{-1});
  e.task = doc.value("task", std::string{});
  e.payload = doc.value("payload", json::object());
  return e;
}

ExecutionLog ExecutionLog::open(const std::filesystem::path& file) {
  ExecutionLog log;
  std::filesystem::create_directories(file.parent_path());
  if (std::filesystem::exists(file)) {
    std::ifstream in(file);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json doc = json::parse(line, nullptr, false);
      if (doc.is_discarded()) raise(Errc::malformed, "log line: " + line);
      LogEntry e = LogEntry::from_json(doc);
      if (log.is_unique_kind(e.event))
        log.unique_.insert({e.job, e.stage, e.task, e.event});
      log.entries_.push_back(std::move(e));
    }
  }
  log.file_ = std::make_shared<std::ofstream>(file, std::ios::app);
  return log;
}

void ExecutionLog::append(LogEntry entry) {
  if (!append_if_new(entry))
    raise(Errc::duplicate_event,
          entry.job + "/s" + std::to_string(entry.stage) + "/" + entry.task + "/" +
              log_event_name(entry.event));
}

bool ExecutionLog::append_if_new(LogEntry entry) {
  if (!entries_.empty() && entry.at_ms < entries_.back().at_ms)
    raise(Errc::bad_state, "log timestamps must not decrease");
  if (is_unique_kind(entry.event)) {
    auto key = std::make_tuple(entry.job, entry.stage, entry.task, entry.event);
    if (unique_.count(key)) return false;
    unique_.insert(std::move(key));
  }
  if (file_) {
    (*file_) << entry.to_json().dump() << "\n";
    file_->flush();
  }
  entries_.push_back(std::move(entry));
  return true;
}

bool ExecutionLog::has(const std::string& job, int64_t stage,
                       const std::string& task, LogEvent event) const {
  if (is_unique_kind(event)) return unique_.count({job, stage, task, event}) != 0;
  for (const auto& e : entries_)
    if (e.job == job && e.stage == stage && e.task == task && e.event == event)
      return true;
  return false;
}

std::vector<const LogEntry*> ExecutionLog::query(const std::string& job,
                                                 std::optional<int64_t> stage,
                                                 std::optional<LogEvent> event) const {
  std::vector<const LogEntry*> out;
  for (const auto& e : entries_) {
    if (e.job != job) continue;
    if (stage && e.stage != *stage) continue;
    if (event && e.event != *event) continue;
    out.push_back(&e);
  }
  return out;
}

}  // namespace flowlet
