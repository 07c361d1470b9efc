#pragma once

#include <map>
#include <optional>
#include <string>

#include "cobra/cio.hpp"
#include "cobra/sim.hpp"

namespace cobra {

struct OutputSpec {
  std::string trace_path = "trace.csv";
  std::string metrics_path = "metrics.json";
  std::string plot_dir;
  int trace_hz = 100;
};

struct OptimizeSpec {
  GaitFamily family = GaitFamily::kSidewinding;
  GaitBounds bounds;
  int budget = 16;
  ShootingObjective objective;
  std::string audit_path = "audit.jsonl";
};

// Parsed scenario: model overrides already applied, initial state built and
// placed on the terrain.
struct Scenario {
  RobotModel model;
  SimConfig sim;
  OutputSpec outputs;
  std::optional<OptimizeSpec> optimize;
  double bearing_limit_pa;
  double patch_area;
  std::string id;
};

// Flat key-value config with [model] [terrain] [contact] [gait] [sim]
// [outputs] [optimize] sections. Throws ValidationError naming the offending
// section/field (and the line for parse errors).
Scenario load_scenario(const std::string& path);

// Initial-state builders used by the loader and by tests.
GeneralizedState make_straight_state(const RobotModel& model,
                                     const Terrain& terrain,
                                     const ContactParams& contact,
                                     const Vec2& xy = Vec2::Zero(),
                                     double yaw = 0.0);

// Places a ring (hexring or spiral joint configuration) upright in the
// vertical plane containing the downhill direction, rolled by release_tilt
// about the ring axis and leaned by lean about the downhill axis, then
// dropped until the lowest candidate touches.
GeneralizedState make_ring_state(const RobotModel& model, const Terrain& terrain,
                                 const JointVector& q_joint,
                                 const Vec2& downhill = Vec2(0, 1),
                                 double release_tilt = 0.0, double lean = 0.0,
                                 const Vec2& xy = Vec2::Zero());

// Static per-link equilibrium penetration for a straight chain resting on
// flat ground (three candidates per link).
double straight_rest_penetration(const RobotModel& model,
                                 const ContactParams& contact);

}  // namespace cobra
