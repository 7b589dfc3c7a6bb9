#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

namespace flowlet {

using json = nlohmann::json;

enum class LogEvent {
  submitted,
  invoked,
  completed,
  respawned,
  paused,
  resumed,
  done,
  failed,
};

const char* log_event_name(LogEvent e);
LogEvent parse_log_event(const std::string& name);

struct LogEntry {
  int64_t at_ms = 0;
  std::string job;
  int64_t stage = -1;  // -1 for job-level events
  std::string task;    // empty for job-level events
  LogEvent event = LogEvent::submitted;
  json payload = json::object();

  json to_json() const;
  static LogEntry from_json(const json& doc);
};

// Append-only. invoked/completed are unique per (job, stage, task); a second
// append of either is the signal that a respawn raced its original, so it is
// rejected rather than recorded.
class ExecutionLog {
 public:
  ExecutionLog() = default;
  // Disk-backed: replays any existing file into memory, then appends to it.
  static ExecutionLog open(const std::filesystem::path& file);

  void append(LogEntry entry);             // DuplicateEvent
  bool append_if_new(LogEntry entry);      // false instead of throwing
  bool has(const std::string& job, int64_t stage, const std::string& task,
           LogEvent event) const;
  std::vector<const LogEntry*> query(const std::string& job,
                                     std::optional<int64_t> stage = {},
                                     std::optional<LogEvent> event = {}) const;
  const std::vector<LogEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

 private:
  bool is_unique_kind(LogEvent e) const {
    return e == LogEvent::invoked || e == LogEvent::completed;
  }

  std::vector<LogEntry> entries_;
  std::set<std::tuple<std::string, int64_t, std::string, LogEvent>> unique_;
  std::shared_ptr<std::ofstream> file_;
};

}  // namespace flowlet
