#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>

#include "flowlet/error.hpp"
#include "flowlet/harness.hpp"
#include "flowlet/pipeline.hpp"
#include "flowlet/primitives.hpp"
#include "flowlet/runconfig.hpp"
#include "flowlet/workload.hpp"

namespace py = pybind11;
using namespace flowlet;

namespace {

json parse_doc(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    raise(Errc::malformed, std::string(what) + ": " + e.what());
  }
}

PipelineSpec spec_from_flat_json(const json& doc) {
  PipelineSpec s;
  for (const char* req : {"name", "table", "log", "timeout"})
    if (!doc.contains(req)) raise(Errc::malformed, std::string("spec missing ") + req);
  s.name = doc.at("name").get<std::string>();
  s.table = doc.at("table").get<std::string>();
  s.log = doc.at("log").get<std::string>();
  s.timeout_s = doc.at("timeout").get<int64_t>();
  if (doc.contains("config")) s.config = FunctionConfig::from_json(doc.at("config"));
  s.input_format = doc.value("input_format", "");
  for (const auto& st : doc.value("stages", json::array())) {
    StageSpec sp;
    sp.kind = parse_stage_kind(st.at("kind").get<std::string>());
    sp.params = st.value("params", json::object());
    if (st.contains("config")) sp.config = FunctionConfig::from_json(st.at("config"));
    s.stages.push_back(std::move(sp));
  }
  return s;
}

std::string compile_pipeline(const std::string& spec_json) {
  return compile(spec_from_flat_json(parse_doc(spec_json, "spec"))).to_bytes();
}

py::dict local_outputs(const std::string& pipeline_json, const py::bytes& input,
                       const std::map<std::string, py::bytes>& tables) {
  auto pipe = load_pipeline(pipeline_json);
  KernelRegistry kernels;
  FormatRegistry formats;
  MemoryStore store;
  for (const auto& [key, bytes] : tables)
    store.try_put(key, static_cast<std::string>(bytes), 0);
  auto res = run_local(pipe, static_cast<std::string>(input), kernels, formats, &store);
  py::dict out;
  for (const auto& [key, bytes] : res.outputs)
    out[py::str(strip_job_prefix(key))] = py::bytes(bytes);
  return out;
}

py::dict simulate(const std::string& pipeline_json, const py::bytes& input,
                  uint64_t seed, double failure_prob, double straggler_prob,
                  bool fault_tolerance,
                  const std::map<std::string, py::bytes>& tables) {
  auto pipe = load_pipeline(pipeline_json);
  RunConfig cfg;
  cfg.seed = seed;
  cfg.cluster.rng_seed = seed;
  cfg.cluster.failure_prob = failure_prob;
  cfg.cluster.straggler_prob = straggler_prob;
  cfg.fault_tolerance = fault_tolerance;
  RuntimeOptions opt;
  opt.config = cfg;
  Runtime rt(opt);
  for (const auto& [key, bytes] : tables)
    rt.store().try_put(key, static_cast<std::string>(bytes), 0);
  rt.store().try_put("input/blob", static_cast<std::string>(input), 0);
  auto rep = run_job(rt, pipe, "input/blob");

  py::dict out;
  out["job"] = rep.job_id;
  out["state"] = job_state_name(rep.state);
  out["makespan_ms"] = rep.makespan_ms;
  out["tasks_completed"] = rep.tasks_completed;
  out["respawns"] = rep.respawns;
  out["cost"] = rep.cost;
  py::dict objs;
  for (const auto& key : rep.outputs)
    objs[py::str(strip_job_prefix(key))] = py::bytes(rt.store().get(key));
  out["outputs"] = objs;
  return out;
}

py::list split_bytes(const py::bytes& blob, int64_t split_size,
                     const std::string& format) {
  FormatRegistry formats;
  std::string bytes = static_cast<std::string>(blob);
  auto chunks = split_blob(bytes, formats.get(format), split_size);
  py::list out;
  for (const auto& c : chunks) out.append(py::bytes(c.bytes));
  return out;
}

py::bytes combine_bytes(const std::vector<py::bytes>& chunks,
                        const std::string& format, const std::string& identifier) {
  FormatRegistry formats;
  std::vector<Chunk> cs;
  int64_t total = static_cast<int64_t>(chunks.size());
  for (int64_t i = 0; i < total; i++) {
    Chunk c;
    c.path = "chunk" + std::to_string(i);
    c.ordinal = i;
    c.total = total;
    c.bytes = static_cast<std::string>(chunks[static_cast<size_t>(i)]);
    cs.push_back(std::move(c));
  }
  std::optional<std::string> ident;
  if (!identifier.empty()) ident = identifier;
  return py::bytes(combine_chunks(cs, formats.get(format), ident));
}

std::vector<int64_t> arrivals(const std::string& workload_json) {
  return arrival_times(WorkloadSpec::from_json(parse_doc(workload_json, "workload")));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "declarative serverless dataflow: pipeline compiler, primitives, simulator";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(PyExc_ValueError,
                      (std::string(errc_name(e.code())) + ": " + e.what()).c_str());
    }
  });

  m.def("compile_pipeline", &compile_pipeline, py::arg("spec_json"),
        "Compile a flat pipeline spec (JSON text) to its canonical form.");
  m.def("run_local", &local_outputs, py::arg("pipeline_json"), py::arg("input"),
        py::arg("tables") = std::map<std::string, py::bytes>{},
        "Run a compiled pipeline serially in-process; returns final outputs.");
  m.def("simulate", &simulate, py::arg("pipeline_json"), py::arg("input"),
        py::arg("seed") = 1, py::arg("failure_prob") = 0.0,
        py::arg("straggler_prob") = 0.0, py::arg("fault_tolerance") = true,
        py::arg("tables") = std::map<std::string, py::bytes>{},
        "Run a compiled pipeline on the simulator; returns a summary dict.");
  m.def("split", &split_bytes, py::arg("blob"), py::arg("split_size"),
        py::arg("format") = "new_line",
        "Record-aligned split of a blob into chunks.");
  m.def("combine", &combine_bytes, py::arg("chunks"), py::arg("format") = "new_line",
        py::arg("identifier") = "",
        "Concatenate chunks in order; with an identifier, merge sorted by key.");
  m.def("rle_encode", [](const py::bytes& b) {
    return py::bytes(rle_encode(static_cast<std::string>(b)));
  });
  m.def("rle_decode", [](const py::bytes& b) {
    return py::bytes(rle_decode(static_cast<std::string>(b)));
  });
  m.def("arrival_times", &arrivals, py::arg("workload_json"),
        "Deterministic job arrival instants (ms) for a workload spec.");
}
