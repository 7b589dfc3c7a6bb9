#include "flowlet/vm_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "flowlet/error.hpp"
#include "flowlet/sim.hpp"

namespace flowlet {

void VmModel::validate() const {
  if (boot_latency_s < 0) raise(Errc::malformed, "boot_latency_s must be >= 0");
  if (evaluation_period_s <= 0)
    raise(Errc::malformed, "evaluation_period_s must be positive");
  if (scale_up_threshold <= scale_down_threshold)
    raise(Errc::malformed, "scale_up_threshold must exceed scale_down_threshold");
  if (vcpus_per_vm <= 0) raise(Errc::malformed, "vcpus_per_vm must be positive");
  if (min_vms <= 0) raise(Errc::malformed, "min_vms must be positive");
  if (vm_cost_rate_per_hour < 0) raise(Errc::malformed, "vm_cost_rate_per_hour must be >= 0");
}

json VmModel::to_json() const {
  return json{{"boot_latency_s", boot_latency_s},
              {"evaluation_period_s", evaluation_period_s},
              {"scale_up_threshold", scale_up_threshold},
              {"scale_down_threshold", scale_down_threshold},
              {"vcpus_per_vm", vcpus_per_vm},
              {"min_vms", min_vms},
              {"vm_cost_rate_per_hour", vm_cost_rate_per_hour}};
}

VmModel VmModel::from_json(const json& doc) {
  VmModel m;
  if (!doc.is_object()) raise(Errc::malformed, "vm config must be an object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const auto& k = it.key();
    const auto& v = it.value();
    if (k == "boot_latency_s") m.boot_latency_s = v.get<int64_t>();
    else if (k == "evaluation_period_s") m.evaluation_period_s = v.get<int64_t>();
    else if (k == "scale_up_threshold") m.scale_up_threshold = v.get<double>();
    else if (k == "scale_down_threshold") m.scale_down_threshold = v.get<double>();
    else if (k == "vcpus_per_vm") m.vcpus_per_vm = v.get<int64_t>();
    else if (k == "min_vms") m.min_vms = v.get<int64_t>();
    else if (k == "vm_cost_rate_per_hour") m.vm_cost_rate_per_hour = v.get<double>();
    else raise(Errc::unknown_param, "vm config does not take '" + k + "'");
  }
  m.validate();
  return m;
}

namespace {

struct Vm {
  int64_t free_vcpus = 0;
  int64_t up_since_ms = 0;
  bool up = false;
};

struct VmState {
  const VmModel* model;
  SimEngine* sim;
  std::vector<Vm> vms;
  std::deque<VmJob> queue;
  int64_t running_jobs = 0;
  int64_t completed = 0;
  int64_t total_jobs = 0;
  double cost = 0;
  int64_t cost_marker_ms = 0;
  VmRunResult* result;

  int64_t up_vcpus() const {
    int64_t n = 0;
    for (const auto& vm : vms)
      if (vm.up) n += model->vcpus_per_vm;
    return n;
  }
  int64_t busy_vcpus() const {
    int64_t n = 0;
    for (const auto& vm : vms)
      if (vm.up) n += model->vcpus_per_vm - vm.free_vcpus;
    return n;
  }
  int64_t booting() const {
    int64_t n = 0;
    for (const auto& vm : vms)
      if (!vm.up) n++;
    return n;
  }
  bool done() const { return completed == total_jobs && queue.empty(); }

  // Cost accrues for every provisioned instance, booting included.
  void accrue(int64_t now) {
    double hours = static_cast<double>(now - cost_marker_ms) / 3600000.0;
    cost += hours * model->vm_cost_rate_per_hour * static_cast<double>(vms.size());
    cost_marker_ms = now;
  }

  void dispatch() {
    while (!queue.empty()) {
      auto& job = queue.front();
      auto vm = std::find_if(vms.begin(), vms.end(), [&](const Vm& v) {
        return v.up && v.free_vcpus >= job.vcpus;
      });
      if (vm == vms.end()) break;
      vm->free_vcpus -= job.vcpus;
      running_jobs++;
      size_t vm_index = static_cast<size_t>(vm - vms.begin());
      VmJob j = std::move(job);
      queue.pop_front();
      int64_t run_ms = std::max<int64_t>(
          1, llround(j.vcpu_seconds / static_cast<double>(j.vcpus) * 1000.0));
      sim->schedule(sim->now() + run_ms, [this, j, vm_index]() {
        vms[vm_index].free_vcpus += j.vcpus;
        running_jobs--;
        completed++;
        result->completions.push_back(VmCompletion{j.id, j.arrival_ms, sim->now()});
        dispatch();
      });
    }
  }

  void evaluate() {
    accrue(sim->now());
    int64_t capacity = up_vcpus();
    double util = capacity > 0 ? static_cast<double>(busy_vcpus()) /
                                     static_cast<double>(capacity)
                               : 1.0;
    if (util > model->scale_up_threshold || capacity == 0) {
      boot_one();
    } else if (util < model->scale_down_threshold &&
               static_cast<int64_t>(vms.size()) > model->min_vms) {
      // Retire the highest-numbered fully idle instance, if any.
      for (size_t i = vms.size(); i > 0; i--) {
        auto& vm = vms[i - 1];
        if (vm.up && vm.free_vcpus == model->vcpus_per_vm) {
          vms.erase(vms.begin() + static_cast<int64_t>(i - 1));
          break;
        }
      }
    }
  }

  void boot_one() {
    vms.push_back(Vm{0, sim->now(), false});
    size_t marker = vms.size();  // instances are never reordered before boot
    sim->schedule(sim->now() + model->boot_latency_s * 1000, [this, marker]() {
      // The fleet may have shrunk; find the oldest still-booting instance.
      for (auto& vm : vms) {
        if (!vm.up) {
          vm.up = true;
          vm.free_vcpus = model->vcpus_per_vm;
          vm.up_since_ms = sim->now();
          dispatch();
          return;
        }
      }
      (void)marker;
    });
  }
};

}  // namespace

VmRunResult run_vm_baseline(const VmModel& model, std::vector<VmJob> jobs,
                            int64_t sample_interval_ms) {
  model.validate();
  SimEngine sim;
  VmRunResult result;
  VmState st;
  st.model = &model;
  st.sim = &sim;
  st.result = &result;
  st.total_jobs = static_cast<int64_t>(jobs.size());
  for (int64_t i = 0; i < model.min_vms; i++)
    st.vms.push_back(Vm{model.vcpus_per_vm, 0, true});

  std::sort(jobs.begin(), jobs.end(), [](const VmJob& a, const VmJob& b) {
    if (a.arrival_ms != b.arrival_ms) return a.arrival_ms < b.arrival_ms;
    return a.id < b.id;
  });
  for (const auto& job : jobs) {
    sim.schedule(job.arrival_ms, [&st, job]() {
      st.queue.push_back(job);
      st.dispatch();
    });
  }

  std::function<void()> eval_tick = [&]() {
    st.evaluate();
    if (!st.done())
      sim.schedule(sim.now() + model.evaluation_period_s * 1000, eval_tick);
  };
  sim.schedule(model.evaluation_period_s * 1000, eval_tick);

  std::function<void()> sample_tick = [&]() {
    st.accrue(sim.now());
    int64_t cap = st.up_vcpus();
    result.samples.push_back(VmSample{
        sim.now(), static_cast<int64_t>(st.vms.size()) - st.booting(), st.booting(),
        static_cast<int64_t>(st.queue.size()), st.running_jobs,
        cap > 0 ? static_cast<double>(st.busy_vcpus()) / static_cast<double>(cap) : 0.0,
        st.cost});
    if (!st.done()) sim.schedule(sim.now() + sample_interval_ms, sample_tick);
  };
  sim.schedule(0, sample_tick);

  sim.run_to_quiescence();
  st.accrue(sim.now());
  result.total_cost = st.cost;
  result.finished_at_ms = sim.now();
  return result;
}

}  // namespace flowlet
