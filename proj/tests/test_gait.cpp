#include <cmath>

#include "cobra/gait.hpp"
#include "doctest.h"

using namespace cobra;

namespace {

GaitSpec gait1() {
  GaitSpec s;
  s.family = GaitFamily::kSidewinding;
  s.amp_h = deg2rad(40.0);
  s.amp_v = deg2rad(20.0);
  s.frequency = 0.5;
  s.phase_per_joint = 2.0 * kPi / 6.0;
  s.wave_phase_offset = kPi / 2.0;
  return s;
}

}  // namespace

TEST_CASE("sidewinding targets: quadrature waves at t = 0") {
  const RobotModel model = build_cobra_model();
  const GaitSpec spec = gait1();
  const JointVector q = sidewinding_targets(model, spec, 0.0);
  int pitch_i = 0, yaw_i = 0;
  for (int j = 0; j < 11; ++j) {
    if (model.joint_is_pitch(j)) {
      CHECK(q(j) ==
            doctest::Approx(0.3491 * std::cos(pitch_i * kPi / 3.0)).epsilon(1e-3));
      ++pitch_i;
    } else {
      CHECK(q(j) ==
            doctest::Approx(0.6981 * std::sin(yaw_i * kPi / 3.0)).epsilon(1e-3));
      ++yaw_i;
    }
  }
  CHECK_THROWS_AS(vertical_undulation_targets(model, spec, 0.0), ValidationError);
}

TEST_CASE("periodicity and amplitude bounds") {
  const RobotModel model = build_cobra_model();
  const GaitSpec spec = gait1();
  const double period = 1.0 / spec.frequency;
  double max_yaw = 0.0, max_pitch = 0.0;
  for (double t = 0.0; t < period; t += period / 997.0) {
    const JointVector a = sidewinding_targets(model, spec, t);
    const JointVector b = sidewinding_targets(model, spec, t + period);
    CHECK((a - b).lpNorm<Eigen::Infinity>() < 1e-9);
    for (int j = 0; j < 11; ++j) {
      if (model.joint_is_pitch(j)) max_pitch = std::max(max_pitch, std::abs(a(j)));
      else max_yaw = std::max(max_yaw, std::abs(a(j)));
      CHECK(std::abs(a(j)) <= deg2rad(70.0));
    }
  }
  CHECK(max_yaw == doctest::Approx(spec.amp_h).epsilon(1e-4));
  CHECK(max_pitch == doctest::Approx(spec.amp_v).epsilon(1e-4));
}

TEST_CASE("vertical undulation: sagittal wave travels") {
  const RobotModel model = build_cobra_model();
  GaitSpec spec = gait1();
  spec.family = GaitFamily::kVerticalUndulation;
  spec.frequency = 0.5;  // the 2 s default gait cycle

  for (double t : {0.0, 0.31, 1.7}) {
    const JointVector q = vertical_undulation_targets(model, spec, t);
    for (int j = 0; j < 11; ++j)
      if (!model.joint_is_pitch(j)) CHECK(q(j) == 0.0);
  }

  // traveling-wave identity: shifting time by the per-joint phase shifts joints
  const double shift = spec.phase_per_joint / (2.0 * kPi * spec.frequency);
  const JointVector a = vertical_undulation_targets(model, spec, 1.0);
  const JointVector b = vertical_undulation_targets(model, spec, 1.0 - shift);
  int pitch_prev = -1;
  for (int j = 0; j < 11; ++j) {
    if (!model.joint_is_pitch(j)) continue;
    if (pitch_prev >= 0)
      CHECK(b(j) == doctest::Approx(a(pitch_prev)).epsilon(1e-9));
    pitch_prev = j;
  }
}

TEST_CASE("lateral rolling: constant-amplitude circle") {
  const RobotModel model = build_cobra_model();
  GaitSpec spec = gait1();
  spec.family = GaitFamily::kLateralRolling;
  spec.amp_v = deg2rad(25.0);

  const JointVector q0 = lateral_rolling_targets(model, spec, 0.0);
  for (int j = 0; j < 11; ++j) {
    if (model.joint_is_pitch(j)) CHECK(q0(j) == doctest::Approx(0.0));
    else CHECK(q0(j) == doctest::Approx(spec.amp_v));
  }
  for (double t = 0.0; t < 2.0; t += 0.113) {
    const JointVector q = lateral_rolling_targets(model, spec, t);
    double pitch = 0, yaw = 0;
    for (int j = 0; j < 11; ++j)
      (model.joint_is_pitch(j) ? pitch : yaw) = q(j);
    CHECK(pitch * pitch + yaw * yaw ==
          doctest::Approx(spec.amp_v * spec.amp_v).epsilon(1e-9));
  }
}

TEST_CASE("hexring transform: staging, limits and latch decision") {
  const RobotModel model = build_cobra_model();
  const double offset = deg2rad(4.0);

  const TransformTargets start = hexring_transform_targets(model, 0.0, 8.0, offset);
  CHECK(start.targets.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(start.latch == LatchCommand::kOpen);

  const TransformTargets done = hexring_transform_targets(model, 8.0, 8.0, offset);
  int pitch_count = 0;
  for (int j = 0; j < 11; ++j) {
    if (model.joint_is_pitch(j)) ++pitch_count;
    else CHECK(done.targets(j) == 0.0);
  }
  CHECK(pitch_count == 6);
  // final two pitch joints carry the latch offset
  CHECK(done.targets(10) == doctest::Approx(kPi / 3.0 + offset));
  CHECK(done.targets(8) == doctest::Approx(kPi / 3.0 + offset));
  CHECK(done.targets(0) == doctest::Approx(kPi / 3.0));

  // engage decision must agree with the FK closure error
  VecX q = VecX::Zero(model.nq());
  q.tail(11) = done.targets;
  auto poses = forward_kinematics(model, q);
  const Pose head = model.head_latch_frame(poses);
  const Pose tail = model.tail_latch_frame(poses);
  const double pos_err = (head.position - tail.position).norm();
  const double ang_err =
      Eigen::AngleAxisd(head.rotation.transpose() * tail.rotation).angle();
  const bool should_engage = pos_err < 0.02 && ang_err < deg2rad(10.0);
  CHECK((done.latch == LatchCommand::kEngage) == should_engage);

  // interpolated targets stay within limits and are C2 in time
  for (double t = 0.0; t <= 8.0; t += 0.05) {
    const TransformTargets tt = hexring_transform_targets(model, t, 8.0, offset);
    for (int j = 0; j < 11; ++j)
      CHECK(std::abs(tt.targets(j)) <= deg2rad(70.0) + 1e-12);
  }
  const double h = 1e-4;
  auto val = [&](double t) {
    return hexring_transform_targets(model, t, 8.0, offset).targets(0);
  };
  // finite-difference second derivative stays bounded through the start
  const double acc0 = (val(2 * h) - 2 * val(h) + val(0.0)) / (h * h);
  CHECK(std::abs(acc0) < 1.0);
}

TEST_CASE("gait spec validation") {
  GaitSpec s = gait1();
  s.frequency = 2.5;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = gait1();
  s.amp_h = deg2rad(71.0);
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = gait1();
  s.family = GaitFamily::kHexringTransform;
  s.amp_h = 0.0;
  s.amp_v = 0.0;
  s.latch_offset = deg2rad(6.0);
  CHECK_THROWS_AS(s.validate(), ValidationError);
}
