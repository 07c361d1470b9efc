#pragma once

#include <string>

#include "cobra/robot_model.hpp"
#include "cobra/types.hpp"

namespace cobra {

enum class GaitFamily {
  kNone,
  kSidewinding,
  kVerticalUndulation,
  kLateralRolling,
  kHexringTransform,
  kSpiralTransform,
};

GaitFamily gait_family_from_string(const std::string& name);
std::string to_string(GaitFamily family);

// Parameterized joint-target generator. Amplitudes are radians; per-family
// fields that do not apply are ignored by the generators.
struct GaitSpec {
  GaitFamily family = GaitFamily::kNone;
  double amp_h = 0.0;             // yaw-wave amplitude
  double amp_v = 0.0;             // pitch-wave amplitude
  double frequency = 0.5;         // Hz
  double phase_per_joint = 2.0 * kPi / 6.0;
  double wave_phase_offset = kPi / 2.0;
  double latch_offset = deg2rad(4.0);  // transform families only
  double transform_duration = 8.0;     // s
  double helix_pitch_angle = 0.15;     // spiral transform target

  void validate() const;  // throws ValidationError naming the field
};

JointVector sidewinding_targets(const RobotModel& model, const GaitSpec& spec,
                                double t);
JointVector vertical_undulation_targets(const RobotModel& model,
                                        const GaitSpec& spec, double t);
JointVector lateral_rolling_targets(const RobotModel& model, const GaitSpec& spec,
                                    double t);

enum class LatchCommand { kOpen, kEngage };

struct TransformTargets {
  JointVector targets;
  LatchCommand latch = LatchCommand::kOpen;
};

// Quintic interpolation from the straight chain to the hex ring, with the
// latch offset added to the final two pitch joints. The engage command is
// issued once the motion has completed and the FK latch-frame error is below
// 2 cm / 10 deg.
TransformTargets hexring_transform_targets(const RobotModel& model, double t,
                                           double duration, double latch_offset);

// Same staging toward the spiral configuration (no latch engagement; the
// spiral stays open).
TransformTargets spiral_transform_targets(const RobotModel& model, double t,
                                          double duration, double helix_pitch_angle);

// Dispatch by family; transform families fold the latch command into the
// returned struct.
TransformTargets gait_targets(const RobotModel& model, const GaitSpec& spec,
                              double t);

}  // namespace cobra
