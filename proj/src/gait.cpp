#include "cobra/gait.hpp"

#include <cmath>

namespace cobra {

GaitFamily gait_family_from_string(const std::string& name) {
  if (name == "none") return GaitFamily::kNone;
  if (name == "sidewinding") return GaitFamily::kSidewinding;
  if (name == "vertical_undulation") return GaitFamily::kVerticalUndulation;
  if (name == "lateral_rolling") return GaitFamily::kLateralRolling;
  if (name == "hexring_transform") return GaitFamily::kHexringTransform;
  if (name == "spiral_transform") return GaitFamily::kSpiralTransform;
  throw ValidationError("gait.family: unknown family '" + name + "'");
}

std::string to_string(GaitFamily family) {
  switch (family) {
    case GaitFamily::kNone: return "none";
    case GaitFamily::kSidewinding: return "sidewinding";
    case GaitFamily::kVerticalUndulation: return "vertical_undulation";
    case GaitFamily::kLateralRolling: return "lateral_rolling";
    case GaitFamily::kHexringTransform: return "hexring_transform";
    case GaitFamily::kSpiralTransform: return "spiral_transform";
  }
  return "none";
}

void GaitSpec::validate() const {
  const bool transform = family == GaitFamily::kHexringTransform ||
                         family == GaitFamily::kSpiralTransform;
  const double limit = deg2rad(70.0);
  if (family != GaitFamily::kNone) {
    if (!(frequency > 0.0) || frequency > 2.0)
      throw ValidationError("gait.frequency: must be in (0, 2] Hz");
  }
  if (transform) {
    if (latch_offset < deg2rad(3.0) - 1e-12 || latch_offset > deg2rad(5.0) + 1e-12)
      throw ValidationError("gait.latch_offset: must be within 3..5 deg");
    if (!(transform_duration > 0))
      throw ValidationError("gait.transform_duration: must be positive");
  }
  const double amp_budget = limit - (transform ? std::abs(latch_offset) : 0.0);
  if (std::abs(amp_h) > amp_budget || std::abs(amp_v) > amp_budget)
    throw ValidationError("gait.amplitude: exceeds joint limit budget");
}

namespace {

void require_family(const GaitSpec& spec, GaitFamily family, const char* op) {
  if (spec.family != family)
    throw ValidationError(std::string(op) + ": wrong gait family " +
                          to_string(spec.family));
}

// quintic ease with zero end velocity and acceleration
double quintic01(double s) {
  if (s <= 0) return 0.0;
  if (s >= 1) return 1.0;
  return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

}  // namespace

JointVector sidewinding_targets(const RobotModel& model, const GaitSpec& spec,
                                double t) {
  require_family(spec, GaitFamily::kSidewinding, "sidewinding_targets");
  JointVector q = JointVector::Zero(model.joint_count());
  int pitch_i = 0, yaw_i = 0;
  const double wt = 2.0 * kPi * spec.frequency * t;
  for (int j = 0; j < model.joint_count(); ++j) {
    if (model.joint_is_pitch(j)) {
      q(j) = spec.amp_v *
             std::sin(wt + pitch_i * spec.phase_per_joint + spec.wave_phase_offset);
      ++pitch_i;
    } else {
      q(j) = spec.amp_h * std::sin(wt + yaw_i * spec.phase_per_joint);
      ++yaw_i;
    }
  }
  return q;
}

JointVector vertical_undulation_targets(const RobotModel& model,
                                        const GaitSpec& spec, double t) {
  require_family(spec, GaitFamily::kVerticalUndulation,
                 "vertical_undulation_targets");
  JointVector q = JointVector::Zero(model.joint_count());
  int pitch_i = 0;
  const double wt = 2.0 * kPi * spec.frequency * t;
  for (int j = 0; j < model.joint_count(); ++j) {
    if (model.joint_is_pitch(j)) {
      q(j) = spec.amp_v * std::sin(wt + pitch_i * spec.phase_per_joint);
      ++pitch_i;
    }
  }
  return q;
}

JointVector lateral_rolling_targets(const RobotModel& model, const GaitSpec& spec,
                                    double t) {
  require_family(spec, GaitFamily::kLateralRolling, "lateral_rolling_targets");
  JointVector q = JointVector::Zero(model.joint_count());
  const double wt = 2.0 * kPi * spec.frequency * t;
  for (int j = 0; j < model.joint_count(); ++j)
    q(j) = model.joint_is_pitch(j) ? spec.amp_v * std::sin(wt)
                                   : spec.amp_v * std::cos(wt);
  return q;
}

namespace {

TransformTargets transform_toward(const RobotModel& model,
                                  const JointVector& goal, double t,
                                  double duration, bool check_latch) {
  if (t < 0) throw ValidationError("t: must be non-negative");
  if (!(duration > 0)) throw ValidationError("duration: must be positive");
  TransformTargets out;
  out.targets = quintic01(t / duration) * goal;
  out.latch = LatchCommand::kOpen;
  if (check_latch && t >= duration) {
    VecX q = VecX::Zero(model.nq());
    q.tail(model.joint_count()) = out.targets;
    auto poses = forward_kinematics(model, q);
    const Pose head = model.head_latch_frame(poses);
    const Pose tail = model.tail_latch_frame(poses);
    const double pos_err = (head.position - tail.position).norm();
    const double ang_err =
        Eigen::AngleAxisd(head.rotation.transpose() * tail.rotation).angle();
    if (pos_err < 0.02 && ang_err < deg2rad(10.0)) out.latch = LatchCommand::kEngage;
  }
  return out;
}

}  // namespace

TransformTargets hexring_transform_targets(const RobotModel& model, double t,
                                           double duration, double latch_offset) {
  JointVector goal = hexring_configuration(model);
  // backlash compensation: bias the final two pitch joints
  int seen = 0;
  for (int j = model.joint_count() - 1; j >= 0; --j) {
    if (model.joint_is_pitch(j)) {
      goal(j) += latch_offset;
      if (++seen == 2) break;
    }
  }
  return transform_toward(model, goal, t, duration, true);
}

TransformTargets spiral_transform_targets(const RobotModel& model, double t,
                                          double duration,
                                          double helix_pitch_angle) {
  return transform_toward(model, spiral_configuration(model, helix_pitch_angle),
                          t, duration, false);
}

TransformTargets gait_targets(const RobotModel& model, const GaitSpec& spec,
                              double t) {
  TransformTargets out;
  switch (spec.family) {
    case GaitFamily::kNone:
      out.targets = JointVector::Zero(model.joint_count());
      return out;
    case GaitFamily::kSidewinding:
      out.targets = sidewinding_targets(model, spec, t);
      return out;
    case GaitFamily::kVerticalUndulation:
      out.targets = vertical_undulation_targets(model, spec, t);
      return out;
    case GaitFamily::kLateralRolling:
      out.targets = lateral_rolling_targets(model, spec, t);
      return out;
    case GaitFamily::kHexringTransform:
      return hexring_transform_targets(model, t, spec.transform_duration,
                                       spec.latch_offset);
    case GaitFamily::kSpiralTransform:
      return spiral_transform_targets(model, t, spec.transform_duration,
                                      spec.helix_pitch_angle);
  }
  out.targets = JointVector::Zero(model.joint_count());
  return out;
}

}  // namespace cobra
