#include "cobra/robot_model.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace cobra {

namespace {

constexpr double kTotalLength = 1.7;
constexpr double kLinkMass = 0.60;
constexpr double kInertiaX = 7.16707e-4;
constexpr double kInertiaY = 8.70397e-4;
constexpr double kInertiaZ = 8.6286e-4;
constexpr double kCapsuleRadius = 0.05;
constexpr double kJointLimit = 1.2217304763960306;  // 70 deg
constexpr double kTorqueContinuous = 8.1;
constexpr double kTorquePeak = 10.0;
constexpr int kLinkCount = 12;

double fetch(const std::map<std::string, double>& m, const std::string& key,
             double fallback) {
  auto it = m.find(key);
  return it == m.end() ? fallback : it->second;
}

}  // namespace

double RobotModel::total_mass() const {
  double m = 0.0;
  for (const auto& l : links) m += l.mass;
  return m;
}

double RobotModel::total_length() const {
  double s = 0.0;
  for (const auto& l : links) s += l.length;
  return s;
}

Pose RobotModel::head_latch_frame(const std::vector<Pose>& link_poses) const {
  const Pose& head = link_poses.front();
  const LinkParams& l = links.front();
  return {head.position - head.rotation * l.com_offset, head.rotation};
}

Pose RobotModel::tail_latch_frame(const std::vector<Pose>& link_poses) const {
  const Pose& tail = link_poses.back();
  const LinkParams& l = links.back();
  Vec3 distal_local = Vec3(l.length, 0, 0) - l.com_offset;
  return {tail.position + tail.rotation * distal_local, tail.rotation};
}

void RobotModel::validate() const {
  if (link_count() != kLinkCount)
    throw ValidationError("links: expected 12, got " + std::to_string(link_count()));
  if (joint_count() != link_count() - 1)
    throw ValidationError("joints: expected 11, got " + std::to_string(joint_count()));
  for (int i = 0; i < link_count(); ++i) {
    const auto& l = links[i];
    const std::string tag = "links[" + std::to_string(i) + "].";
    if (!(l.mass > 0)) throw ValidationError(tag + "mass: must be positive");
    if (!(l.length > 0)) throw ValidationError(tag + "length: must be positive");
    if (!(l.radius > 0)) throw ValidationError(tag + "radius: must be positive");
    const Vec3& I = l.principal_inertia;
    if (!(I.x() > 0 && I.y() > 0 && I.z() > 0))
      throw ValidationError(tag + "principal_inertia: must be positive");
    if (I.x() + I.y() < I.z() || I.y() + I.z() < I.x() || I.z() + I.x() < I.y())
      throw ValidationError(tag + "principal_inertia: triangle inequality violated");
  }
  for (int j = 0; j < joint_count(); ++j) {
    const auto& jp = joints[j];
    const std::string tag = "joints[" + std::to_string(j) + "].";
    if (!(jp.limit_min < jp.limit_max))
      throw ValidationError(tag + "angle_limits: inverted");
    if (!(jp.torque_continuous < jp.torque_peak))
      throw ValidationError(tag + "torque_continuous: must be below torque_peak");
    if (std::abs(jp.axis.norm() - 1.0) > 1e-9)
      throw ValidationError(tag + "axis: must be unit norm");
  }
}

RobotModel build_cobra_model(const std::map<std::string, double>& overrides) {
  static const char* known[] = {"link_mass",      "inertia_x",     "inertia_y",
                                "inertia_z",      "link_length",   "capsule_radius",
                                "joint_limit_deg", "torque_continuous", "torque_peak"};
  for (const auto& [key, value] : overrides) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ValidationError("override: unknown key '" + key + "'");
    (void)value;
  }

  LinkParams link;
  link.mass = fetch(overrides, "link_mass", kLinkMass);
  link.principal_inertia = Vec3(fetch(overrides, "inertia_x", kInertiaX),
                                fetch(overrides, "inertia_y", kInertiaY),
                                fetch(overrides, "inertia_z", kInertiaZ));
  link.length = fetch(overrides, "link_length", kTotalLength / kLinkCount);
  link.radius = fetch(overrides, "capsule_radius", kCapsuleRadius);
  link.com_offset = Vec3(link.length / 2.0, 0, 0);

  const double limit = deg2rad(fetch(overrides, "joint_limit_deg", rad2deg(kJointLimit)));
  JointParams pitch;
  pitch.axis = Vec3::UnitY();
  pitch.limit_min = -limit;
  pitch.limit_max = limit;
  pitch.torque_continuous = fetch(overrides, "torque_continuous", kTorqueContinuous);
  pitch.torque_peak = fetch(overrides, "torque_peak", kTorquePeak);
  JointParams yaw = pitch;
  yaw.axis = Vec3::UnitZ();

  RobotModel model;
  model.links.assign(kLinkCount, link);
  for (int j = 0; j < kLinkCount - 1; ++j)
    model.joints.push_back(model.joint_is_pitch(j) ? pitch : yaw);
  model.validate();
  return model;
}

Mat3 euler_zyx_to_rotation(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
          Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

Vec3 rotation_to_euler_zyx(const Mat3& r) {
  // pitch from -R(2,0); roll/yaw degenerate exactly at |pitch| = pi/2
  double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  double roll, yaw;
  if (std::abs(std::cos(pitch)) > 1e-12) {
    roll = std::atan2(r(2, 1), r(2, 2));
    yaw = std::atan2(r(1, 0), r(0, 0));
  } else {
    roll = std::atan2(-r(1, 2), r(1, 1));
    yaw = 0.0;
  }
  return Vec3(roll, pitch, yaw);
}

std::vector<Pose> forward_kinematics(const RobotModel& model, const VecX& q,
                                     const Quat& orientation_ref) {
  const int n = model.link_count();
  if (q.size() != model.nq())
    throw ValidationError("q: expected size " + std::to_string(model.nq()));

  std::vector<Pose> poses(n);
  poses[0].position = q.head<3>();
  poses[0].rotation = euler_zyx_to_rotation(q.segment<3>(3)) * orientation_ref.toRotationMatrix();

  for (int j = 0; j < model.joint_count(); ++j) {
    const LinkParams& lk = model.links[j];
    const LinkParams& lk1 = model.links[j + 1];
    Vec3 distal_local = Vec3(lk.length, 0, 0) - lk.com_offset;
    Vec3 joint_world = poses[j].position + poses[j].rotation * distal_local;
    Mat3 rot = poses[j].rotation *
               Eigen::AngleAxisd(q(6 + j), model.joints[j].axis).toRotationMatrix();
    poses[j + 1].rotation = rot;
    poses[j + 1].position = joint_world + rot * lk1.com_offset;
  }
  return poses;
}

std::vector<ContactCandidate> contact_candidates(const RobotModel& model,
                                                 const VecX& q,
                                                 const Quat& orientation_ref) {
  auto poses = forward_kinematics(model, q, orientation_ref);
  std::vector<ContactCandidate> out;
  out.reserve(3 * model.link_count());
  for (int k = 0; k < model.link_count(); ++k) {
    const LinkParams& l = model.links[k];
    const double inset = std::min(l.radius, l.length / 2.0);
    const Vec3 proximal = -l.com_offset;
    const Vec3 distal = Vec3(l.length, 0, 0) - l.com_offset;
    const Vec3 axis_pts[3] = {proximal + Vec3(inset, 0, 0),
                              0.5 * (proximal + distal),
                              distal - Vec3(inset, 0, 0)};
    for (int p = 0; p < 3; ++p) {
      ContactCandidate c;
      c.link = k;
      c.point_index = p;
      // axis point pushed to the capsule surface toward the terrain (down)
      Vec3 axis_world = poses[k].position + poses[k].rotation * axis_pts[p];
      Vec3 surf_world = axis_world - Vec3(0, 0, l.radius);
      c.world = surf_world;
      c.local = poses[k].rotation.transpose() * (surf_world - poses[k].position);
      out.push_back(c);
    }
  }
  return out;
}

JointVector hexring_configuration(const RobotModel& model) {
  JointVector q = JointVector::Zero(model.joint_count());
  for (int j = 0; j < model.joint_count(); ++j)
    if (model.joint_is_pitch(j)) q(j) = kPi / 3.0;
  return q;
}

double ring_axial_offset(const RobotModel& model, const JointVector& q_j) {
  VecX q = VecX::Zero(model.nq());
  q.tail(model.joint_count()) = q_j;
  auto poses = forward_kinematics(model, q);

  Eigen::MatrixXd centers(model.link_count(), 3);
  Vec3 mean = Vec3::Zero();
  for (int k = 0; k < model.link_count(); ++k) mean += poses[k].position;
  mean /= model.link_count();
  for (int k = 0; k < model.link_count(); ++k)
    centers.row(k) = (poses[k].position - mean).transpose();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centers, Eigen::ComputeFullV);
  Vec3 axis = svd.matrixV().col(2);  // least-variance direction: ring normal

  Vec3 gap = model.tail_latch_frame(poses).position -
             model.head_latch_frame(poses).position;
  double offset = gap.dot(axis);
  return std::abs(offset);
}

JointVector spiral_configuration(const RobotModel& model, double helix_pitch_angle) {
  if (!(helix_pitch_angle > 0.0) || helix_pitch_angle > 0.35)
    throw ValidationError("helix_pitch_angle: must be in (0, 0.35] rad");

  const double target = model.total_length() * std::sin(helix_pitch_angle);

  // A uniform yaw angle only tilts the closed ring (the mid-side kink
  // directions rotate with the link frames and cancel around the loop), so
  // the helix opens via a ring-frame-fixed kink pattern: yaw_k follows a
  // cosine over the loop angle. The phase is picked by a coarse scan, the
  // amplitude by bisection against the measured axial offset.
  auto with_pattern = [&](double amp, double phase) {
    JointVector q = hexring_configuration(model);
    int k = 0;
    for (int j = 0; j < model.joint_count(); ++j)
      if (!model.joint_is_pitch(j))
        q(j) = amp * std::cos(k++ * kPi / 3.0 + phase);
    return q;
  };

  double best_phase = 0.0, best_gain = -1.0;
  for (int i = 0; i < 64; ++i) {
    const double phase = 2.0 * kPi * i / 64.0;
    const double gain = ring_axial_offset(model, with_pattern(0.1, phase));
    if (gain > best_gain) {
      best_gain = gain;
      best_phase = phase;
    }
  }

  // the offset saturates near 0.9 rad; bisect inside the monotone region
  double lo = 0.0, hi = 0.9;
  if (ring_axial_offset(model, with_pattern(hi, best_phase)) < target)
    throw ValidationError("helix_pitch_angle: unreachable within joint limits");
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double offset = ring_axial_offset(model, with_pattern(mid, best_phase));
    (offset < target ? lo : hi) = mid;
  }
  JointVector q = with_pattern(0.5 * (lo + hi), best_phase);
  for (int j = 0; j < model.joint_count(); ++j) {
    if (q(j) < model.joints[j].limit_min || q(j) > model.joints[j].limit_max)
      throw ValidationError("spiral_configuration: joint limit exceeded");
  }
  return q;
}

}  // namespace cobra
