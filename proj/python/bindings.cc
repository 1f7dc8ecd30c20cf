/*
 * Copyright 2026 The ccfl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ccfl/config.h"
#include "ccfl/data.h"
#include "ccfl/diagnostics.h"
#include "ccfl/errors.h"
#include "ccfl/experiment.h"
#include "ccfl/protocol.h"

namespace py = pybind11;

namespace ccfl {
namespace {

std::vector<double> ToList(const ParamVec& v) {
  return {v.values().begin(), v.values().end()};
}

py::dict RowToDict(const MetricRow& r) {
  py::dict d;
  d["round"] = r.round;
  d["method"] = r.method;
  d["seed"] = r.seed;
  d["test_loss"] = r.test_loss;
  d["test_acc"] = r.test_acc;
  d["grad_norm_sq"] = r.grad_norm_sq;
  d["min_grad_norm_sq"] = r.min_grad_norm_sq;
  d["est_err_s2"] = r.est_err_s2;
  d["est_err_s3"] = r.est_err_s3;
  d["cos_s2"] = r.cos_s2;
  d["cos_s3"] = r.cos_s3;
  d["trained_count"] = r.trained_count;
  d["estimated_count"] = r.estimated_count;
  return d;
}

py::dict RunToDict(const MethodRun& run) {
  py::dict d;
  d["method"] = run.method;
  d["seed"] = run.seed;
  py::list rows;
  for (const auto& r : run.rows) rows.append(RowToDict(r));
  d["rows"] = rows;
  d["abort_message"] = run.abort_message;
  d["local_steps"] = run.local_steps;
  d["final_model"] = run.final_model ? py::cast(ToList(*run.final_model))
                                     : py::object(py::none());
  d["final_test_loss"] = run.rows.empty() ? py::object(py::none())
                                          : py::cast(run.final_test_loss());
  d["final_test_acc"] = run.final_test_acc();
  return d;
}

py::dict OutcomeToDict(const RoundOutcome& o) {
  py::dict d;
  d["round"] = o.round;
  d["selected"] = o.selected;
  d["trained"] = o.trained;
  d["estimated"] = o.estimated;
  d["skipped_entirely"] = o.skipped_entirely;
  py::dict contrib;
  for (const auto& [id, v] : o.contributions) contrib[py::int_(id)] = ToList(v);
  d["contributions"] = contrib;
  d["delta"] = ToList(o.delta);
  d["next_model"] = ToList(o.next_model);
  d["local_steps"] = o.local_steps;
  d["warnings"] = o.warnings;
  return d;
}

py::dict ArmToDict(const EfficiencyArm& a) {
  py::dict d;
  d["method"] = a.method;
  d["rounds"] = a.rounds;
  d["local_steps"] = a.local_steps;
  d["final_test_loss"] = a.final_test_loss;
  d["final_test_acc"] = a.final_test_acc;
  return d;
}

py::dict ProbeToDict(const Lemma2Result& r) {
  py::dict d;
  d["lhs"] = r.lhs;
  d["rhs"] = r.rhs;
  d["lhs_stderr"] = r.lhs_stderr;
  d["mean_delta_norm_sq"] = r.mean_delta_norm_sq;
  d["noise_term"] = r.noise_term;
  d["n_resamples"] = r.n_resamples;
  return d;
}

// A Federation together with the task data it was built from.
class Session {
 public:
  Session(const ExperimentConfig& config, const std::string& method,
          std::uint64_t seed)
      : task_(build_task(config, seed)),
        federation_(task_.objectives, build_budgets(config),
                    build_method(config, method), build_hyper(config),
                    task_.x0, config.rounds, seed, config.workers) {}

  py::dict step() { return OutcomeToDict(federation_.step()); }
  std::vector<double> model() const { return ToList(federation_.state().x); }
  int round() const { return federation_.state().t; }
  long local_steps() const { return federation_.local_steps(); }
  std::string method() const { return federation_.spec().label(); }
  double grad_norm_sq() const {
    return track_global_gradient(task_.objectives, federation_.state().x);
  }
  py::dict lemma2(int n_resamples, std::uint64_t probe_seed) const {
    return ProbeToDict(lemma2_probe(federation_, n_resamples, probe_seed));
  }

 private:
  TaskData task_;
  Federation federation_;
};

}  // namespace
}  // namespace ccfl

PYBIND11_MODULE(_ccfl, m) {
  using namespace ccfl;
  m.doc() = "Federated optimisation with computation-constrained clients.";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", error.ptr());
  py::register_exception<IoError>(m, "IoError", error.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", error.ptr());

  py::class_<ExperimentConfig>(m, "Config")
      .def(py::init<>())
      .def_static("parse", [](const std::string& text) {
        return parse_config(text);
      })
      .def_static("load", &load_config, py::arg("path"))
      .def_static("keys", &config_keys)
      .def("set",
           [](ExperimentConfig& c, const std::string& key,
              const std::string& value) { set_config_value(c, key, value); },
           py::arg("key"), py::arg("value"))
      .def("serialize", &serialize_config)
      .def("validate", &validate_config)
      .def("copy", [](const ExperimentConfig& c) { return c; })
      .def(py::self == py::self)
      .def_property(
          "task", [](const ExperimentConfig& c) { return to_string(c.task); },
          [](ExperimentConfig& c, const std::string& s) {
            c.task = parse_task(s);
          })
      .def_readwrite("n_clients", &ExperimentConfig::n_clients)
      .def_readwrite("rounds", &ExperimentConfig::rounds)
      .def_readwrite("local_steps", &ExperimentConfig::local_steps)
      .def_readwrite("eta", &ExperimentConfig::eta)
      .def_readwrite("ratio", &ExperimentConfig::ratio)
      .def_readwrite("methods", &ExperimentConfig::methods)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("seeds", &ExperimentConfig::seeds)
      .def_readwrite("out", &ExperimentConfig::out)
      .def_readwrite("workers", &ExperimentConfig::workers)
      .def("__repr__", [](const ExperimentConfig& c) {
        return "<ccfedavg.Config task=" + to_string(c.task) +
               " rounds=" + std::to_string(c.rounds) + ">";
      });

  m.def("assign_budgets",
        [](int n, int beta) { return assign_budgets(n, beta).p; },
        py::arg("n_clients"), py::arg("beta"));
  m.def("two_group_budgets",
        [](int n, double r, int W) { return two_group_budgets(n, r, W).p; },
        py::arg("n_clients"), py::arg("r"), py::arg("W"));
  m.def("budgets", [](const ExperimentConfig& c) { return build_budgets(c).p; },
        py::arg("config"));
  m.def("canonical_method",
        [](const std::string& label) { return parse_method(label).label(); },
        py::arg("label"));

  m.def(
      "run_experiment",
      [](const ExperimentConfig& c) {
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(c);
        }
        py::dict d;
        py::list runs;
        for (const auto& run : r.runs) runs.append(RunToDict(run));
        d["runs"] = runs;
        d["files"] = r.files;
        d["any_aborted"] = r.any_aborted;
        return d;
      },
      py::arg("config"));

  m.def(
      "run_grid_rw",
      [](const ExperimentConfig& c, const std::vector<double>& r_values,
         const std::vector<int>& W_values, bool write) {
        std::vector<GridCell> cells;
        {
          py::gil_scoped_release release;
          cells = run_grid_rw(c, r_values, W_values, write);
        }
        py::list out;
        for (const auto& g : cells) {
          py::dict d;
          d["r"] = g.r;
          d["W"] = g.W;
          d["method"] = g.method;
          d["final_test_loss"] = g.final_test_loss;
          d["final_test_acc"] = g.final_test_acc;
          d["min_grad_norm_sq"] = g.min_grad_norm_sq;
          out.append(d);
        }
        return out;
      },
      py::arg("config"), py::arg("r_values"), py::arg("W_values"),
      py::arg("write") = false);

  m.def(
      "run_efficiency",
      [](const ExperimentConfig& c, int W, bool write) {
        EfficiencyResult r;
        {
          py::gil_scoped_release release;
          r = run_efficiency_comparison(c, W, write);
        }
        py::dict d;
        d["cc_fedavg"] = ArmToDict(r.cc_fedavg);
        d["fedavg"] = ArmToDict(r.fedavg);
        return d;
      },
      py::arg("config"), py::arg("W"), py::arg("write") = false);

  m.def(
      "probe_lemma2",
      [](const ExperimentConfig& c, int warmup, int n_resamples) {
        Lemma2Result r;
        {
          py::gil_scoped_release release;
          r = run_lemma2_probe(c, warmup, n_resamples);
        }
        return ProbeToDict(r);
      },
      py::arg("config"), py::arg("warmup") = 10, py::arg("n_resamples") = 500);

  m.def("read_metrics", [](const std::string& path) {
    py::list out;
    for (const auto& r : read_metrics(path)) out.append(RowToDict(r));
    return out;
  }, py::arg("path"));

  py::class_<Session>(m, "Federation")
      .def(py::init<const ExperimentConfig&, const std::string&,
                    std::uint64_t>(),
           py::arg("config"), py::arg("method"), py::arg("seed") = 1)
      .def("step", &Session::step)
      .def_property_readonly("model", &Session::model)
      .def_property_readonly("round", &Session::round)
      .def_property_readonly("local_steps", &Session::local_steps)
      .def_property_readonly("method", &Session::method)
      .def("grad_norm_sq", &Session::grad_norm_sq)
      .def("lemma2", &Session::lemma2, py::arg("n_resamples") = 500,
           py::arg("probe_seed") = 1);
}
