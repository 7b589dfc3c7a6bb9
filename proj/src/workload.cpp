#include "flowlet/workload.hpp"

#include <algorithm>
#include <cmath>

#include "flowlet/error.hpp"

namespace flowlet {

json JobTemplate::to_json() const {
  json doc;
  doc["pipeline"] = pipeline;
  doc["input_bytes"] = input_bytes;
  doc["goal"] = goal.to_json();
  doc["priority"] = priority;
  return doc;
}

JobTemplate JobTemplate::from_json(const json& doc) {
  JobTemplate t;
  t.pipeline = doc.value("pipeline", "");
  t.input_bytes = doc.value("input_bytes", int64_t{1'000'000});
  if (doc.contains("goal")) t.goal = JobGoal::from_json(doc.at("goal"));
  t.priority = doc.value("priority", 0);
  if (t.input_bytes <= 0) raise(Errc::malformed, "input_bytes must be positive");
  return t;
}

const char* workload_kind_name(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::single: return "single";
    case WorkloadKind::uniform: return "uniform";
    case WorkloadKind::bursty: return "bursty";
    case WorkloadKind::diurnal: return "diurnal";
  }
  return "?";
}

WorkloadKind parse_workload_kind(const std::string& name) {
  if (name == "single") return WorkloadKind::single;
  if (name == "uniform") return WorkloadKind::uniform;
  if (name == "bursty") return WorkloadKind::bursty;
  if (name == "diurnal") return WorkloadKind::diurnal;
  raise(Errc::malformed, "unknown workload kind: " + name);
}

void WorkloadSpec::validate() const {
  if (interval_s <= 0) raise(Errc::malformed, "interval_s must be positive");
  if (duration_s <= 0) raise(Errc::malformed, "duration_s must be positive");
  if (burst_period_s <= 0) raise(Errc::malformed, "burst_period_s must be positive");
  if (period_s <= 0) raise(Errc::malformed, "period_s must be positive");
  if (burst_size < 1) raise(Errc::malformed, "burst_size must be at least 1");
  if (peak_jobs_per_interval < 0)
    raise(Errc::malformed, "peak_jobs_per_interval must be non-negative");
}

json WorkloadSpec::to_json() const {
  json doc;
  doc["kind"] = workload_kind_name(kind);
  doc["interval_s"] = interval_s;
  doc["duration_s"] = duration_s;
  doc["burst_size"] = burst_size;
  doc["burst_period_s"] = burst_period_s;
  doc["period_s"] = period_s;
  doc["peak_jobs_per_interval"] = peak_jobs_per_interval;
  doc["job"] = job.to_json();
  return doc;
}

WorkloadSpec WorkloadSpec::from_json(const json& doc) {
  WorkloadSpec s;
  s.kind = parse_workload_kind(doc.value("kind", "single"));
  s.interval_s = doc.value("interval_s", s.interval_s);
  s.duration_s = doc.value("duration_s", s.duration_s);
  s.burst_size = doc.value("burst_size", s.burst_size);
  s.burst_period_s = doc.value("burst_period_s", s.burst_period_s);
  s.period_s = doc.value("period_s", s.period_s);
  s.peak_jobs_per_interval = doc.value("peak_jobs_per_interval", s.peak_jobs_per_interval);
  if (doc.contains("job")) s.job = JobTemplate::from_json(doc.at("job"));
  s.validate();
  return s;
}

std::vector<int64_t> arrival_times(const WorkloadSpec& spec) {
  spec.validate();
  std::vector<int64_t> out;
  auto ms = [](double s) { return static_cast<int64_t>(std::llround(s * 1000.0)); };
  switch (spec.kind) {
    case WorkloadKind::single:
      out.push_back(0);
      break;
    case WorkloadKind::uniform:
      for (double t = 0; t < spec.duration_s; t += spec.interval_s) out.push_back(ms(t));
      break;
    case WorkloadKind::bursty:
      for (double t = 0; t < spec.duration_s; t += spec.interval_s) out.push_back(ms(t));
      for (double t = spec.burst_period_s; t < spec.duration_s; t += spec.burst_period_s)
        for (int64_t i = 0; i < spec.burst_size; i++) out.push_back(ms(t));
      break;
    case WorkloadKind::diurnal:
      for (double t = 0; t < spec.duration_s; t += spec.interval_s) {
        double phase = std::fmod(t, spec.period_s) / spec.period_s;
        auto n = static_cast<int64_t>(std::llround(
            static_cast<double>(spec.peak_jobs_per_interval) *
            std::sin(phase * 3.14159265358979323846)));
        for (int64_t i = 0; i < n; i++)
          out.push_back(ms(t + spec.interval_s * static_cast<double>(i) /
                                   static_cast<double>(n)));
      }
      break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace flowlet
