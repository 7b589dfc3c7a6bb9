#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowlet/orchestrator.hpp"

namespace flowlet {

struct JobTemplate {
  std::string pipeline;  // compiled pipeline JSON path
  int64_t input_bytes = 1'000'000;
  JobGoal goal;
  int priority = 0;

  json to_json() const;
  static JobTemplate from_json(const json& doc);
};

enum class WorkloadKind { single, uniform, bursty, diurnal };

const char* workload_kind_name(WorkloadKind k);
WorkloadKind parse_workload_kind(const std::string& name);

// Arrival patterns: one job, fixed inter-arrival, steady rate with periodic
// spikes, and a half-sine rise-and-fall.
struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::single;
  double interval_s = 10;
  double duration_s = 600;
  int64_t burst_size = 100;
  double burst_period_s = 300;
  double period_s = 600;
  int64_t peak_jobs_per_interval = 15;
  JobTemplate job;

  void validate() const;
  json to_json() const;
  static WorkloadSpec from_json(const json& doc);
};

// Deterministic arrival instants in ms, ascending. No randomness: the same
// spec always produces the same schedule.
std::vector<int64_t> arrival_times(const WorkloadSpec& spec);

}  // namespace flowlet
