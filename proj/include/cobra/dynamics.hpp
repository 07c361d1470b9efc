#pragma once

#include <vector>

#include "cobra/robot_model.hpp"
#include "cobra/types.hpp"

namespace cobra {

inline const Vec3 kStandardGravity(0, 0, -9.81);

// Generalized position/velocity of the floating-base chain. The head pose is
// [x y z, roll pitch yaw] (ZYX Euler) composed with orientation_ref, so long
// rolling trajectories can re-chart away from the pitch singularity while the
// coordinates stay Euler angles.
struct GeneralizedState {
  Vec3 head_position = Vec3::Zero();
  Vec3 head_euler = Vec3::Zero();  // [q_r, q_p, q_y]
  VecX q_joint;                    // n_joints
  VecX u;                          // 6 + n_joints, u = dq/dt
  Quat orientation_ref = Quat::Identity();

  static GeneralizedState zero(const RobotModel& model);

  VecX q() const;
  void set_q(const VecX& q);
  Mat3 head_rotation() const;
  double gimbal_margin() const { return kPi / 2.0 - std::abs(head_euler.y()); }

  // Folds the current Euler triple into orientation_ref and re-zeros it,
  // preserving the physical orientation and world angular velocity.
  void rechart();
};

// Per-state kinematics cache: link poses, joint axes, link twists and the
// velocity-product (u_dot = 0) accelerations used by bias terms and contact
// rate residuals.
class ChainKinematics {
 public:
  ChainKinematics(const RobotModel& model, const GeneralizedState& state);

  const std::vector<Pose>& poses() const { return poses_; }
  const Vec3& joint_position(int j) const { return joint_pos_[j]; }
  const Vec3& joint_axis(int j) const { return joint_axis_[j]; }
  const Vec3& omega(int k) const { return omega_[k]; }
  const Vec3& v_com(int k) const { return v_com_[k]; }
  const Vec3& alpha_vp(int k) const { return alpha_vp_[k]; }
  const Vec3& a_com_vp(int k) const { return a_com_vp_[k]; }
  const Mat3& inertia_world(int k) const { return inertia_world_[k]; }
  const Mat3& euler_rate_map() const { return e_map_; }

  Vec3 point_velocity(int link, const Vec3& world_point) const;
  // Acceleration of a body-fixed point with u_dot = 0 (velocity products only).
  Vec3 point_acceleration_vp(int link, const Vec3& world_point) const;
  // 3 x nu world-velocity Jacobian of a body-fixed point.
  MatX point_jacobian(int link, const Vec3& world_point) const;
  // 3 x nu angular-velocity Jacobian of a link.
  MatX link_angular_jacobian(int link) const;

  Vec3 com_position() const;
  Vec3 com_velocity() const;
  double kinetic_energy() const;  // per-link summation
  double potential_energy(const Vec3& gravity) const;
  // World angular momentum about the system center of mass.
  Vec3 angular_momentum_about_com() const;
  // 3 x nu map u -> angular momentum about the CoM (head-translation
  // columns vanish identically).
  MatX angular_momentum_matrix() const;

  const RobotModel& model() const { return *model_; }
  int nu() const { return model_->nu(); }

 private:
  const RobotModel* model_;
  std::vector<Pose> poses_;
  std::vector<Vec3> joint_pos_, joint_axis_;
  std::vector<Vec3> omega_, v_com_, alpha_vp_, a_com_vp_;
  std::vector<Mat3> inertia_world_;
  Mat3 e_map_, e_map_dot_;
};

struct DynamicsTerms {
  MatX mass;  // nu x nu, symmetric positive definite
  VecX bias;  // nu, h = C(q,u)u + G(q) + B(q) tau  with  M du = h + J^T f
};

struct PointForce {
  int link = 0;
  Vec3 world_point = Vec3::Zero();
  Vec3 force = Vec3::Zero();
};

MatX mass_matrix(const RobotModel& model, const GeneralizedState& state);

VecX bias_forces(const RobotModel& model, const GeneralizedState& state,
                 const VecX& tau, const Vec3& gravity = kStandardGravity);

// Cache-reusing variants for inner loops (no precondition re-validation).
MatX mass_matrix(const ChainKinematics& kin);
VecX bias_vector(const ChainKinematics& kin, const VecX& tau, const Vec3& gravity);

// 3 x nu Jacobian of a body-fixed material point (world velocity = J u).
MatX contact_jacobian(const RobotModel& model, const GeneralizedState& state,
                      const ContactCandidate& point);

VecX forward_dynamics(const RobotModel& model, const GeneralizedState& state,
                      const VecX& tau, const std::vector<PointForce>& forces,
                      const Vec3& gravity = kStandardGravity);

struct TumblingBlocks {
  MatX m_jj, m_jh, m_hj, m_hh;
  MatX m_prime;  // Schur complement M_JJ - M_JH M_HH^-1 M_HJ
  VecX h_j;      // joint rows of the bias at tau = 0
};

TumblingBlocks partition_tumbling(const RobotModel& model,
                                  const GeneralizedState& state,
                                  const Vec3& gravity = kStandardGravity);

// Reduced tumbling state: joint coordinates stay Lagrangian while the head
// coordinates are replaced by their conjugate momenta (angular momentum about
// the CoM and linear momentum via the CoM velocity).
struct TumblingState {
  VecX q_joint;
  VecX u_joint;
  Vec3 head_euler = Vec3::Zero();
  Quat orientation_ref = Quat::Identity();
  Vec3 sigma_cm = Vec3::Zero();  // angular momentum about the CoM, kg m^2/s
  Vec3 com_position = Vec3::Zero();
  Vec3 com_velocity = Vec3::Zero();
};

struct TumblingDerivative {
  VecX q_joint_dot;
  VecX u_joint_dot;
  Vec3 head_euler_dot;
  Vec3 sigma_cm_dot;
  Vec3 com_position_dot;
  Vec3 com_velocity_dot;
};

TumblingState make_tumbling_state(const RobotModel& model,
                                  const GeneralizedState& state);

// Inverse of make_tumbling_state: recovers head pose and velocity from the
// momentum variables.
GeneralizedState reconstruct_full_state(const RobotModel& model,
                                        const TumblingState& tstate);

TumblingDerivative tumbling_state_derivative(
    const RobotModel& model, const TumblingState& tstate, const VecX& tau,
    const std::vector<PointForce>& forces, const Vec3& gravity = kStandardGravity);

}  // namespace cobra
