#include "terrasim/contact.hpp"
#include "terrasim/gait.hpp"
#include "terrasim/scenario.hpp"
#include "terrasim/scm.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>

namespace py = pybind11;
using namespace terrasim;

namespace {

py::dict metrics_dict(const RunMetrics& m) {
  py::dict d;
  d["scenario"] = m.scenario;
  d["tier"] = m.tier;
  d["signature"] = m.signature;
  d["displacement_per_cycle"] = m.displacement_per_cycle;
  d["net_heading"] = m.net_heading;
  d["peak_normal_force"] = m.peak_normal_force;
  d["mean_contact_power"] = m.mean_contact_power;
  d["rut_depth_max"] = m.rut_depth_max;
  d["descent_distance"] = m.descent_distance;
  d["step_count"] = m.step_count;
  d["nonconvergence_count"] = m.nonconvergence_count;
  return d;
}

}  // namespace

PYBIND11_MODULE(_terrasim, m) {
  m.doc() = "Planar chain locomotion on rigid, SCM and DEM terrain.";

  auto config_error = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", config_error);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<UnstableSimulation>(m, "UnstableSimulation", PyExc_RuntimeError);
  py::register_exception<DegenerateInput>(m, "DegenerateInput", PyExc_ValueError);

  py::class_<SmoothedContactParams>(m, "SmoothedContactParams")
      .def(py::init<>())
      .def_readwrite("k", &SmoothedContactParams::k)
      .def_readwrite("b", &SmoothedContactParams::b)
      .def_readwrite("w", &SmoothedContactParams::w)
      .def_readwrite("mu_s", &SmoothedContactParams::mu_s)
      .def_readwrite("mu_d", &SmoothedContactParams::mu_d)
      .def_readwrite("v_crit", &SmoothedContactParams::v_crit)
      .def_readwrite("eps_v", &SmoothedContactParams::eps_v)
      .def("validate", &SmoothedContactParams::validate);

  m.def("normal_force_smoothed", &normal_force_smoothed, py::arg("d"), py::arg("d_rate"),
        py::arg("params") = SmoothedContactParams{});
  m.def("mu_effective", &mu_effective, py::arg("u_t"), py::arg("params") = SmoothedContactParams{});
  m.def("smoothstep", &smoothstep, py::arg("d"), py::arg("w"));

  py::class_<SoilParams>(m, "SoilParams")
      .def(py::init<>())
      .def_readwrite("K_c", &SoilParams::K_c)
      .def_readwrite("K_phi", &SoilParams::K_phi)
      .def_readwrite("n", &SoilParams::n_exp)
      .def_readwrite("cohesion", &SoilParams::cohesion)
      .def_readwrite("phi", &SoilParams::phi)
      .def_readwrite("k_shear", &SoilParams::k_shear)
      .def_readwrite("K_elastic", &SoilParams::K_elastic)
      .def_readwrite("R_damp", &SoilParams::R_damp)
      .def("validate", &SoilParams::validate);

  m.def("bekker_pressure", &bekker_pressure, py::arg("z"), py::arg("b"),
        py::arg("soil") = SoilParams{});
  m.def("shear_strength", &shear_strength, py::arg("p"), py::arg("soil") = SoilParams{});
  m.def("janosi_shear", &janosi_shear, py::arg("j"), py::arg("p"), py::arg("soil") = SoilParams{});

  py::class_<GaitProgram>(m, "GaitProgram")
      .def(py::init<>())
      .def_readwrite("A_ver", &GaitProgram::A_ver)
      .def_readwrite("A_hor", &GaitProgram::A_hor)
      .def_readwrite("f", &GaitProgram::f)
      .def_readwrite("n_joints", &GaitProgram::n_joints)
      .def_readwrite("phase_step", &GaitProgram::phase_step)
      .def_readwrite("ramp_time", &GaitProgram::ramp_time)
      .def_readwrite("signs", &GaitProgram::signs)
      .def("validate", &GaitProgram::validate)
      .def_static("gait1", &GaitProgram::gait1)
      .def_static("gait2", &GaitProgram::gait2);

  m.def("gait_sample", &gait_sample, py::arg("gait"), py::arg("t"));
  m.def("gait_velocity", &gait_velocity, py::arg("gait"), py::arg("t"));
  m.def(
      "gait_to_csv",
      [](const GaitProgram& g, double duration, double rate, const std::string& path) {
        gait_to_csv(g, duration, rate, path);
      },
      py::arg("gait"), py::arg("duration"), py::arg("rate"), py::arg("path"));

  py::class_<GaitTrajectory>(m, "GaitTrajectory")
      .def("sample", &GaitTrajectory::sample, py::arg("t"))
      .def_property_readonly("joints", &GaitTrajectory::joints)
      .def_property_readonly("times", &GaitTrajectory::times);
  m.def("gait_from_csv", py::overload_cast<const std::string&>(&gait_from_csv), py::arg("path"));

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def_readwrite("id", &ScenarioConfig::id)
      .def_readwrite("h", &ScenarioConfig::h)
      .def_readwrite("duration", &ScenarioConfig::duration)
      .def_readwrite("settle", &ScenarioConfig::settle)
      .def_readwrite("log_rate", &ScenarioConfig::log_rate)
      .def_readwrite("seed", &ScenarioConfig::seed)
      .def_readwrite("threads", &ScenarioConfig::threads)
      .def_readwrite("output_dir", &ScenarioConfig::output_dir)
      .def_readonly("warnings", &ScenarioConfig::warnings)
      .def_property_readonly("tier", [](const ScenarioConfig& c) { return tier_name(c.tier); })
      .def_property_readonly("motion", [](const ScenarioConfig& c) { return motion_name(c.motion); })
      .def("motion_signature", &ScenarioConfig::motion_signature)
      .def("validate", [](ScenarioConfig& c) {
        c.sync();
        c.validate();
      })
      .def("echo", [](const ScenarioConfig& c) { return config_echo(c); });

  m.def("preset_names", [] {
    std::vector<std::string> names;
    for (const auto& [name, text] : builtin_presets()) names.push_back(name);
    return names;
  });
  m.def("load_preset", &load_preset, py::arg("name"));
  m.def("parse_config_text", &parse_config_text, py::arg("text"), py::arg("source") = "<input>");
  m.def("parse_config", py::overload_cast<const std::string&>(&parse_config), py::arg("path"));

  m.def(
      "run_scenario",
      [](const ScenarioConfig& cfg) {
        RunMetrics r;
        {
          py::gil_scoped_release release;
          r = run_scenario(cfg);
        }
        return metrics_dict(r);
      },
      py::arg("config"));
  m.def(
      "recompute_metrics", [](const std::string& dir) { return metrics_dict(recompute_metrics(dir)); },
      py::arg("run_dir"));
}
