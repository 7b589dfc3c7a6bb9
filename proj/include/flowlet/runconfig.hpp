#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "flowlet/kernels.hpp"
#include "flowlet/scheduler.hpp"
#include "flowlet/sim.hpp"
#include "flowlet/vm_baseline.hpp"
#include "flowlet/workload.hpp"

namespace flowlet {

// One file configures a whole run: cluster model, scheduling policy, fault
// tolerance, workload, and output plumbing. CLI flags override fields after
// loading.
struct RunConfig {
  ClusterModel cluster;
  DurationModel durations;
  VmModel vm;
  PolicyKind policy = PolicyKind::fifo;
  uint64_t seed = 1;
  bool fault_tolerance = true;
  int64_t monitor_interval_ms = 1000;
  int max_attempts = 20;
  int64_t sample_interval_ms = 10000;
  std::string out_dir;  // empty: env default
  std::string profile_csv;
  std::optional<WorkloadSpec> workload;

  void validate() const;
  json to_json() const;
  static RunConfig from_json(const json& doc);
};

RunConfig load_run_config(const std::string& path);

// FLOWLET_OUT when set, else "out".
std::string default_out_dir();

}  // namespace flowlet
