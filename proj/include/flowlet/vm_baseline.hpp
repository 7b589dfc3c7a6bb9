#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace flowlet {

using json = nlohmann::json;

// Reactive VM fleet: scale out one instance when utilization crosses the
// high-water mark at an evaluation tick, retire one idle instance below the
// low-water mark, never below the floor. New instances take boot_latency_s
// before they accept work.
struct VmModel {
  int64_t boot_latency_s = 30;
  int64_t evaluation_period_s = 300;
  double scale_up_threshold = 0.70;
  double scale_down_threshold = 0.30;
  int64_t vcpus_per_vm = 16;
  int64_t min_vms = 1;
  double vm_cost_rate_per_hour = 0.768;

  void validate() const;
  json to_json() const;
  static VmModel from_json(const json& doc);
};

struct VmJob {
  std::string id;
  int64_t arrival_ms = 0;
  double vcpu_seconds = 0;  // total work; runs on one VM using `vcpus` cores
  int64_t vcpus = 2;
};

struct VmSample {
  int64_t time_ms = 0;
  int64_t vms_up = 0;
  int64_t vms_booting = 0;
  int64_t queue_depth = 0;
  int64_t running_jobs = 0;
  double utilization = 0;
  double cost_accrued = 0;
};

struct VmCompletion {
  std::string id;
  int64_t arrival_ms = 0;
  int64_t finished_ms = 0;
};

struct VmRunResult {
  std::vector<VmSample> samples;
  std::vector<VmCompletion> completions;
  double total_cost = 0;
  int64_t finished_at_ms = 0;
};

VmRunResult run_vm_baseline(const VmModel& model, std::vector<VmJob> jobs,
                            int64_t sample_interval_ms = 10000);

}  // namespace flowlet
