#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cpsnet/chi2.hpp"
#include "cpsnet/control.hpp"
#include "cpsnet/harness.hpp"

namespace py = pybind11;
using json = nlohmann::json;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::object& o) { return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>()); }

cpsnet::ScenarioConfig load(const std::string& path, const std::optional<std::string>& text) {
  return text ? cpsnet::load_config_string(*text, path) : cpsnet::load_config(path);
}

py::dict run_dict(const cpsnet::RunResult& r) {
  py::dict d;
  d["exit_code"] = static_cast<int>(r.exit_code);
  d["diagnostic"] = r.diagnostic;
  d["summary"] = to_py(r.summary);
  d["failed_audits"] = r.failed_audits;
  d["trace"] = r.trace;
  return d;
}

}  // namespace

PYBIND11_MODULE(_cpsnet, m) {
  m.doc() = "Networked control-loop simulator with programmable-network mitigation";

  py::register_exception<cpsnet::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<cpsnet::CompareError>(m, "CompareError", PyExc_ValueError);

  m.def(
      "validate",
      [](const std::string& path, const std::optional<std::string>& text) {
        const auto cfg = load(path, text);
        py::dict d;
        d["seed"] = cfg.seed;
        d["steps"] = cfg.steps();
        d["tau"] = cfg.resolved_tau();
        d["switches"] = cfg.topology.switches;
        d["hosts"] = cfg.topology.hosts;
        d["attacks"] = cfg.attacks.size();
        return d;
      },
      py::arg("path"), py::arg("text") = std::nullopt,
      "Load and validate a scenario. With `text`, parse that YAML and use `path` only in messages.");

  m.def(
      "run",
      [](const std::string& path, std::optional<std::uint64_t> seed, std::optional<std::string> out_dir, bool trace,
         bool records, const std::optional<std::string>& text) {
        auto cfg = load(path, text);
        if (seed) cfg.seed = *seed;
        cpsnet::RunResult r;
        {
          py::gil_scoped_release release;
          r = cpsnet::run_scenario(cfg, cpsnet::RunOptions{out_dir, trace});
        }
        auto d = run_dict(r);
        if (records) d["records"] = to_py(json(r.records));
        return d;
      },
      py::arg("path"), py::arg("seed") = std::nullopt, py::arg("out_dir") = std::nullopt, py::arg("trace") = false,
      py::arg("records") = false, py::arg("text") = std::nullopt);

  m.def(
      "batch",
      [](const std::string& path, std::size_t seeds, std::size_t jobs, std::optional<std::string> out_dir) {
        const auto cfg = cpsnet::load_config(path);
        cpsnet::BatchResult b;
        {
          py::gil_scoped_release release;
          b = cpsnet::run_batch(cfg, seeds, jobs, out_dir);
        }
        py::list runs;
        for (const auto& r : b.runs) runs.append(run_dict(r));
        py::dict d;
        d["aggregate"] = to_py(b.aggregate);
        d["runs"] = runs;
        return d;
      },
      py::arg("path"), py::arg("seeds"), py::arg("jobs") = 1, py::arg("out_dir") = std::nullopt);

  m.def(
      "compare",
      [](const py::object& a, const py::object& b) { return to_py(cpsnet::compare_runs(from_py(a), from_py(b))); },
      py::arg("baseline"), py::arg("treatment"), "Per-metric deltas between two run summaries.");

  m.def(
      "summarize", [](const py::object& records) { return to_py(cpsnet::summarize(from_py(records).get<std::vector<json>>())); },
      py::arg("records"));

  m.def("lqr_gain", [](const cpsnet::Matrix& A, const cpsnet::Matrix& B, const cpsnet::Matrix& Q,
                       const cpsnet::Matrix& R) { return cpsnet::lqr_gain(A, B, Q, R); },
        py::arg("A"), py::arg("B"), py::arg("Q"), py::arg("R"));
  m.def("chi2_quantile", &cpsnet::chi2_quantile, py::arg("prob"), py::arg("dof"));
  m.def("chi2_cdf", &cpsnet::chi2_cdf, py::arg("x"), py::arg("dof"));
  m.def(
      "wilson_interval",
      [](std::uint64_t k, std::uint64_t n) {
        const auto w = cpsnet::wilson_interval(k, n);
        return py::make_tuple(w.estimate, w.low, w.high);
      },
      py::arg("successes"), py::arg("trials"));
}
