#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cobra/types.hpp"

namespace cobra {

struct LinkParams {
  double mass = 0.0;            // kg
  Vec3 principal_inertia;       // kg m^2, body frame
  double length = 0.0;          // m, along the chain axis
  double radius = 0.0;          // m, collision capsule radius
  Vec3 com_offset;              // m, from the proximal joint frame
};

struct JointParams {
  Vec3 axis;                    // unit, body frame of the proximal link
  double limit_min = 0.0;       // rad
  double limit_max = 0.0;       // rad
  double torque_continuous = 0.0;  // N m
  double torque_peak = 0.0;        // N m
};

using JointVector = VecX;  // one angle per joint, rad

struct Pose {
  Vec3 position;
  Mat3 rotation;
};

// Kinematic and inertial description of the articulated chain. Link frames
// sit at each link's center of mass with x along the chain axis; joint k
// couples link k to link k+1 and alternates pitch (y) / yaw (z) starting
// with pitch. Immutable after construction.
struct RobotModel {
  std::vector<LinkParams> links;
  std::vector<JointParams> joints;
  int head_frame_index = 0;

  int link_count() const { return static_cast<int>(links.size()); }
  int joint_count() const { return static_cast<int>(joints.size()); }
  int nq() const { return 6 + joint_count(); }
  int nu() const { return 6 + joint_count(); }

  double total_mass() const;
  double total_length() const;
  bool joint_is_pitch(int j) const { return j % 2 == 0; }

  // Latch frames: the head docking frame is the head link's proximal face,
  // the tail frame is the tail link's distal face.
  Pose head_latch_frame(const std::vector<Pose>& link_poses) const;
  Pose tail_latch_frame(const std::vector<Pose>& link_poses) const;

  void validate() const;  // throws ValidationError naming the bad field
};

// Canonical 12-link model with the simulation parameter set. Recognized
// override keys: link_mass, inertia_x, inertia_y, inertia_z, link_length,
// capsule_radius, joint_limit_deg, torque_continuous, torque_peak.
RobotModel build_cobra_model(
    const std::map<std::string, double>& overrides = {});

// q = [q_H; q_J] with q_H = [x y z, roll pitch yaw] (ZYX Euler). The head
// rotation is R_zyx(euler) * orientation_ref; the reference lets long
// tumbling runs re-chart away from the pitch singularity.
std::vector<Pose> forward_kinematics(const RobotModel& model, const VecX& q,
                                     const Quat& orientation_ref = Quat::Identity());

struct ContactCandidate {
  int link = 0;
  int point_index = 0;  // 0 proximal, 1 mid, 2 distal (capsule axis, inset by radius)
  Vec3 local;           // body-frame offset from the link frame, on the capsule surface
  Vec3 world;
};

// Three candidate points per link, projected from the capsule axis to the
// surface toward the terrain (downward). Ordering is (link, point_index).
std::vector<ContactCandidate> contact_candidates(
    const RobotModel& model, const VecX& q,
    const Quat& orientation_ref = Quat::Identity());

// Closed hexagon: the six pitch joints bend 60 deg, yaw joints stay straight,
// and the latch vertex supplies the sixth 0-degree corner.
JointVector hexring_configuration(const RobotModel& model);

// Helical variant of the hex ring: constant yaw offsets open the ring into a
// spiral whose axial advance per turn is total_length * sin(helix_pitch_angle).
JointVector spiral_configuration(const RobotModel& model, double helix_pitch_angle);

// Axial end-to-end offset of a ring-like configuration, measured along the
// best-fit ring axis (used by spiral_configuration and its tests).
double ring_axial_offset(const RobotModel& model, const JointVector& q_j);

Mat3 euler_zyx_to_rotation(const Vec3& rpy);
Vec3 rotation_to_euler_zyx(const Mat3& r);

}  // namespace cobra
