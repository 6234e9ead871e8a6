/*
 * Copyright 2026 The dvppsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dvppsim/dvpp.hpp"
#include "dvppsim/engine.hpp"
#include "dvppsim/errors.hpp"
#include "dvppsim/io.hpp"
#include "dvppsim/network.hpp"

namespace py = pybind11;

using dvppsim::dvpp::Allocation;
using dvppsim::dvpp::AuditReport;
using dvppsim::dvpp::DvppSpec;
using dvppsim::engine::DeviceTrace;
using dvppsim::engine::DvppConfig;
using dvppsim::engine::Metrics;
using dvppsim::engine::Scenario;
using dvppsim::engine::SimOutput;
using dvppsim::network::LoadEvent;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Phasor-domain grid simulation with coordinated inverter plants";
  m.attr("__version__") = "0.1.0";

  const auto err = py::register_exception<dvppsim::Error>(m, "Error",
                                                          PyExc_RuntimeError);
  py::register_exception<dvppsim::SimError>(m, "SimError", err.ptr());
  py::register_exception<dvppsim::ConfigError>(m, "ConfigError",
                                               PyExc_ValueError);

  py::class_<LoadEvent>(m, "LoadEvent")
      .def(py::init<>())
      .def(py::init([](double t, int bus, double dp, double dq) {
             return LoadEvent{t, bus, dp, dq};
           }),
           py::arg("t"), py::arg("bus"), py::arg("dp"), py::arg("dq") = 0.0)
      .def_readwrite("t", &LoadEvent::t)
      .def_readwrite("bus", &LoadEvent::bus)
      .def_readwrite("dp", &LoadEvent::dp)
      .def_readwrite("dq", &LoadEvent::dq)
      .def("__repr__", [](const LoadEvent& e) {
        return "LoadEvent(t=" + std::to_string(e.t) +
               ", bus=" + std::to_string(e.bus) +
               ", dp=" + std::to_string(e.dp) +
               ", dq=" + std::to_string(e.dq) + ")";
      });

  py::class_<DvppSpec>(m, "DvppSpec")
      .def("validate", &DvppSpec::validate)
      .def_readwrite("t_slow", &DvppSpec::t_slow)
      .def_readwrite("t_fast", &DvppSpec::t_fast)
      .def("to_json", [](const DvppSpec& s) {
        return dvppsim::io::dvpp_spec_to_json(s).dump(2);
      });

  py::class_<DvppConfig>(m, "DvppConfig")
      .def_readonly("id", &DvppConfig::id)
      .def_readonly("bus", &DvppConfig::bus)
      .def_readonly("t_track", &DvppConfig::t_track)
      .def_readonly("spec", &DvppConfig::spec);

  py::class_<Scenario>(m, "Scenario")
      .def(py::init<>())
      .def_readwrite("name", &Scenario::name)
      .def_readwrite("slack_bus", &Scenario::slack_bus)
      .def_readwrite("slack_v", &Scenario::slack_v)
      .def_readwrite("events", &Scenario::events,
                     "Load steps; assign a full list, element edits on the "
                     "returned copy are not written back.")
      .def_readwrite("dispatch_p", &Scenario::dispatch_p)
      .def_readwrite("dispatch_q", &Scenario::dispatch_q)
      .def_readonly("dvpps", &Scenario::dvpps)
      .def_property(
          "dt", [](const Scenario& s) { return s.solver.dt; },
          [](Scenario& s, double v) { s.solver.dt = v; })
      .def_property(
          "t_end", [](const Scenario& s) { return s.solver.t_end; },
          [](Scenario& s, double v) { s.solver.t_end = v; })
      .def("device_names",
           [](const Scenario& s) {
             std::vector<std::string> names;
             for (const auto& d : s.devices) names.push_back(d.name);
             return names;
           })
      .def("validate", &Scenario::validate)
      .def("to_json", [](const Scenario& s) {
        return dvppsim::io::scenario_to_json(s).dump(2);
      });

  py::class_<DeviceTrace>(m, "DeviceTrace")
      .def_readonly("id", &DeviceTrace::id)
      .def_readonly("name", &DeviceTrace::name)
      .def_readonly("bus", &DeviceTrace::bus)
      .def_readonly("dvpp_id", &DeviceTrace::dvpp_id)
      .def_readonly("f_hz", &DeviceTrace::f_hz)
      .def_readonly("dp_pu", &DeviceTrace::dp_pu)
      .def_readonly("dq_pu", &DeviceTrace::dq_pu)
      .def_readonly("v_mag_pu", &DeviceTrace::v_mag_pu)
      .def_readonly("any_saturated", &DeviceTrace::any_saturated)
      .def_readonly("any_lost_lock", &DeviceTrace::any_lost_lock);

  py::class_<SimOutput>(m, "SimOutput")
      .def_readonly("dt", &SimOutput::dt)
      .def_readonly("f_nom_hz", &SimOutput::f_nom_hz)
      .def_readonly("t", &SimOutput::t)
      .def_readonly("traces", &SimOutput::traces)
      .def_readonly("event_times", &SimOutput::event_times);

  py::class_<Metrics>(m, "Metrics")
      .def_readonly("nadir_hz", &Metrics::nadir_hz)
      .def_readonly("nadir_time_s", &Metrics::nadir_time_s)
      .def_readonly("max_rocof_hz_per_s", &Metrics::max_rocof_hz_per_s)
      .def_readonly("coherence_hz", &Metrics::coherence_hz)
      .def_readonly("steady_state_dev_hz", &Metrics::steady_state_dev_hz)
      .def_readonly("recovery_time_s", &Metrics::recovery_time_s)
      .def_readonly("relay_order", &Metrics::relay_order)
      .def("__str__", &dvppsim::engine::metrics_text);

  py::class_<AuditReport>(m, "AuditReport")
      .def_readonly("passed", &AuditReport::pass)
      .def_readonly("max_residual_wp", &AuditReport::max_residual_wp)
      .def_readonly("max_residual_vq", &AuditReport::max_residual_vq)
      .def_readonly("tolerance", &AuditReport::tolerance);

  py::class_<Allocation>(m, "Allocation")
      .def_readonly("audit", &Allocation::audit)
      .def_readonly("diagnostics", &Allocation::diagnostics)
      .def("report", &dvppsim::dvpp::allocation_report_text);

  m.def("build_experiment", &dvppsim::engine::build_experiment, py::arg("n"),
        "Canonical scenarios 1..3: all machines, one coordinated plant, two "
        "coordinated plants.");
  m.def("run", &dvppsim::engine::run, py::arg("scenario"),
        py::call_guard<py::gil_scoped_release>());
  m.def("compute_metrics", &dvppsim::engine::compute_metrics, py::arg("out"),
        py::arg("t_event"));
  m.def("metrics_text", &dvppsim::engine::metrics_text, py::arg("metrics"));

  m.def("load_scenario", &dvppsim::io::load_scenario, py::arg("path"));
  m.def("load_dvpp_spec", &dvppsim::io::load_dvpp_spec, py::arg("path"));
  m.def("allocate", &dvppsim::dvpp::allocate, py::arg("spec"));
  m.def("timeseries_csv", &dvppsim::io::timeseries_csv, py::arg("out"));
  m.def("parse_timeseries_csv", &dvppsim::io::parse_timeseries_csv,
        py::arg("text"));
  m.def("metrics_json", &dvppsim::io::metrics_json, py::arg("metrics"),
        py::arg("out"), py::arg("scenario"));
  m.def("plot_svg", &dvppsim::io::plot_svg, py::arg("out"));
}
