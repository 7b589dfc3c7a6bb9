#include "flowlet/runconfig.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "flowlet/error.hpp"

namespace flowlet {

void RunConfig::validate() const {
  cluster.validate();
  vm.validate();
  if (monitor_interval_ms <= 0) raise(Errc::malformed, "monitor_interval_ms must be positive");
  if (max_attempts < 1) raise(Errc::malformed, "max_attempts must be at least 1");
  if (sample_interval_ms <= 0) raise(Errc::malformed, "sample_interval_ms must be positive");
  if (workload) workload->validate();
}

json RunConfig::to_json() const {
  json doc;
  doc["cluster"] = cluster.to_json();
  doc["durations"] = durations.to_json();
  doc["vm"] = vm.to_json();
  doc["scheduler"] = policy_name(policy);
  doc["seed"] = seed;
  doc["fault_tolerance"] = fault_tolerance;
  doc["monitor_interval_ms"] = monitor_interval_ms;
  doc["max_attempts"] = max_attempts;
  doc["sample_interval_ms"] = sample_interval_ms;
  if (!out_dir.empty()) doc["out_dir"] = out_dir;
  if (!profile_csv.empty()) doc["profile_csv"] = profile_csv;
  if (workload) doc["workload"] = workload->to_json();
  return doc;
}

RunConfig RunConfig::from_json(const json& doc) {
  if (!doc.is_object()) raise(Errc::malformed, "config must be a JSON object");
  RunConfig c;
  if (doc.contains("cluster")) c.cluster = ClusterModel::from_json(doc.at("cluster"));
  if (doc.contains("durations")) c.durations = DurationModel::from_json(doc.at("durations"));
  if (doc.contains("vm")) c.vm = VmModel::from_json(doc.at("vm"));
  if (doc.contains("scheduler")) c.policy = parse_policy(doc.at("scheduler").get<std::string>());
  c.seed = doc.value("seed", c.seed);
  c.fault_tolerance = doc.value("fault_tolerance", c.fault_tolerance);
  c.monitor_interval_ms = doc.value("monitor_interval_ms", c.monitor_interval_ms);
  c.max_attempts = doc.value("max_attempts", c.max_attempts);
  c.sample_interval_ms = doc.value("sample_interval_ms", c.sample_interval_ms);
  c.out_dir = doc.value("out_dir", "");
  c.profile_csv = doc.value("profile_csv", "");
  if (doc.contains("workload")) c.workload = WorkloadSpec::from_json(doc.at("workload"));
  c.cluster.rng_seed = c.seed;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::not_found, "config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::exception& e) {
    raise(Errc::malformed, std::string("config parse: ") + e.what());
  }
  return RunConfig::from_json(doc);
}

std::string default_out_dir() {
  const char* env = std::getenv("FLOWLET_OUT");
  return env && *env ? env : "out";
}

}  // namespace flowlet
