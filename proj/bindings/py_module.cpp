#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cobra/cio.hpp"
#include "cobra/metrics.hpp"
#include "cobra/scenario.hpp"
#include "cobra/trace_io.hpp"

namespace py = pybind11;
using namespace cobra;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multibody dynamics and gait optimization for a 12-link snake robot";

  py::register_exception<ValidationError>(m, "ValidationError");
  py::register_exception<SingularityError>(m, "SingularityError");
  py::register_exception<DivergenceError>(m, "DivergenceError");

  py::class_<RobotModel>(m, "RobotModel")
      .def_property_readonly("link_count", &RobotModel::link_count)
      .def_property_readonly("joint_count", &RobotModel::joint_count)
      .def_property_readonly("total_mass", &RobotModel::total_mass)
      .def_property_readonly("total_length", &RobotModel::total_length);

  py::class_<ContactParams>(m, "ContactParams")
      .def(py::init<>())
      .def_static("stiff", &ContactParams::stiff)
      .def_static("compliant", &ContactParams::compliant)
      .def_readwrite("k_n", &ContactParams::k_n)
      .def_readwrite("d_n", &ContactParams::d_n)
      .def_readwrite("transition_width", &ContactParams::transition_width)
      .def_readwrite("mu_s", &ContactParams::mu_s)
      .def_readwrite("mu_k", &ContactParams::mu_k)
      .def_readwrite("v_crit", &ContactParams::v_crit);

  py::class_<GaitSpec>(m, "GaitSpec")
      .def(py::init<>())
      .def_readwrite("amp_h", &GaitSpec::amp_h)
      .def_readwrite("amp_v", &GaitSpec::amp_v)
      .def_readwrite("frequency", &GaitSpec::frequency)
      .def_readwrite("phase_per_joint", &GaitSpec::phase_per_joint)
      .def_readwrite("wave_phase_offset", &GaitSpec::wave_phase_offset)
      .def_property(
          "family",
          [](const GaitSpec& s) { return to_string(s.family); },
          [](GaitSpec& s, const std::string& f) {
            s.family = gait_family_from_string(f);
          });

  py::class_<Metrics>(m, "Metrics")
      .def_readonly("avg_speed", &Metrics::avg_speed)
      .def_readonly("duty_factor", &Metrics::duty_factor)
      .def_readonly("duty_factor_whole_body", &Metrics::duty_factor_whole_body)
      .def_readonly("peak_normal", &Metrics::peak_normal)
      .def_readonly("avg_power", &Metrics::avg_power)
      .def_readonly("cost_of_transport", &Metrics::cost_of_transport)
      .def_readonly("per_cycle_advance", &Metrics::per_cycle_advance)
      .def_readonly("max_contact_pressure", &Metrics::max_contact_pressure)
      .def_readonly("distance", &Metrics::distance)
      .def_readonly("revolutions", &Metrics::revolutions)
      .def_readonly("tipover", &Metrics::tipover);

  m.def("build_cobra_model", &build_cobra_model,
        py::arg("overrides") = std::map<std::string, double>{},
        "Canonical 12-link model; override keys like link_mass, inertia_x.");

  m.def(
      "forward_kinematics",
      [](const RobotModel& model, const VecX& q) {
        auto poses = forward_kinematics(model, q);
        std::vector<std::pair<Vec3, Mat3>> out;
        for (const auto& p : poses) out.emplace_back(p.position, p.rotation);
        return out;
      },
      py::arg("model"), py::arg("q"),
      "Link center poses for q = [head pose (6); joint angles].");

  m.def(
      "contact_candidate_points",
      [](const RobotModel& model, const VecX& q) {
        auto cands = contact_candidates(model, q);
        std::vector<Vec3> pts;
        for (const auto& c : cands) pts.push_back(c.world);
        return pts;
      },
      py::arg("model"), py::arg("q"));

  m.def("hexring_configuration", &hexring_configuration, py::arg("model"));
  m.def("spiral_configuration", &spiral_configuration, py::arg("model"),
        py::arg("helix_pitch_angle"));

  m.def(
      "sidewinding_targets",
      [](const RobotModel& model, const GaitSpec& spec, double t) {
        return sidewinding_targets(model, spec, t);
      },
      py::arg("model"), py::arg("spec"), py::arg("t"));
  m.def(
      "vertical_undulation_targets",
      [](const RobotModel& model, const GaitSpec& spec, double t) {
        return vertical_undulation_targets(model, spec, t);
      },
      py::arg("model"), py::arg("spec"), py::arg("t"));
  m.def(
      "lateral_rolling_targets",
      [](const RobotModel& model, const GaitSpec& spec, double t) {
        return lateral_rolling_targets(model, spec, t);
      },
      py::arg("model"), py::arg("spec"), py::arg("t"));

  m.def(
      "gap_flat",
      [](double height, const Vec3& point, double radius) {
        return gap(FlatPlane{height}, point, radius).g;
      },
      py::arg("height"), py::arg("point"), py::arg("radius"));
  m.def("normal_force", &normal_force, py::arg("g"), py::arg("g_dot"),
        py::arg("params"));
  m.def(
      "friction_force",
      [](const Vec2& v_t, double f_n, const ContactParams& p) {
        return friction_force(v_t, f_n, p);
      },
      py::arg("v_t"), py::arg("f_n"), py::arg("params"));

  m.def(
      "run_scenario_config",
      [](const std::string& path) {
        Scenario sc = load_scenario(path);
        SimTrace trace = run_scenario(sc.model, sc.sim);
        if (trace.diverged)
          throw DivergenceError("scenario diverged: " + trace.divergence_reason);
        double period = 0.0;
        if (!sc.sim.track_ring && sc.sim.gait.family != GaitFamily::kNone &&
            sc.sim.gait.family != GaitFamily::kHexringTransform &&
            sc.sim.gait.family != GaitFamily::kSpiralTransform)
          period = 1.0 / sc.sim.gait.frequency;
        return compute_metrics(trace, period, sc.patch_area);
      },
      py::arg("config_path"),
      "Run a scenario config end to end and return its metrics.");
}
