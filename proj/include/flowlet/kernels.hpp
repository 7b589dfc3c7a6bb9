#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowlet/format.hpp"

namespace flowlet {

using json = nlohmann::json;

struct KernelInput {
  // Primary inputs in ordinal order: (object key, bytes).
  std::vector<std::pair<std::string, std::string>> inputs;
  // Side inputs resolved from pair manifests, keyed by the names the mapping
  // stage assigned.
  std::map<std::string, std::string> bindings;
  json params = json::object();
  std::string format;  // declared format of the primary inputs
  const FormatRegistry* formats = nullptr;
};

struct KernelResult {
  std::vector<std::pair<std::string, std::string>> outputs;  // name -> bytes
  // Cost driver for the duration model; 0 means "total input bytes".
  double work_units = 0;
};

using KernelFn = std::function<KernelResult(const KernelInput&)>;

class KernelRegistry {
 public:
  KernelRegistry();  // built-in toy applications registered

  void add(const std::string& name, KernelFn fn);
  bool has(const std::string& name) const;
  KernelResult invoke(const std::string& name, const KernelInput& in) const;
  int64_t calls(const std::string& name) const;
  void reset_calls();
  // Test hook: observes every invocation before it runs.
  void set_probe(std::function<void(const std::string&, const KernelInput&)> probe);

 private:
  std::map<std::string, KernelFn> kernels_;
  mutable std::map<std::string, int64_t> calls_;
  std::function<void(const std::string&, const KernelInput&)> probe_;
};

// Byte-level run-length encoding used by the toy compressor: (count, byte)
// pairs with count in [1, 255].
std::string rle_encode(std::string_view bytes);
std::string rle_decode(std::string_view bytes);

// Virtual task runtimes: affine in work units, keyed by task type (stage
// kinds, internal sort phases, and "run:<application>").
struct DurationModel {
  struct Coef {
    double base_ms = 20.0;
    double per_unit_ms = 0.00002;
  };

  Coef fallback;
  std::map<std::string, Coef> overrides;

  double duration_ms(const std::string& type, double work_units) const;
  json to_json() const;
  static DurationModel from_json(const json& doc);
};

}  // namespace flowlet
