#include "cobra/dynamics.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace cobra {

namespace {

constexpr double kGimbalMargin = 1e-6;

void check_gimbal(const GeneralizedState& state) {
  if (state.gimbal_margin() < kGimbalMargin)
    throw SingularityError("head_euler: pitch within gimbal margin of pi/2");
}

// World angular velocity map for ZYX Euler rates, omega = E * [dr, dp, dy].
Mat3 euler_rate_map_zyx(const Vec3& rpy) {
  const double cp = std::cos(rpy.y()), sp = std::sin(rpy.y());
  const double cy = std::cos(rpy.z()), sy = std::sin(rpy.z());
  Mat3 e;
  e.col(0) = Vec3(cy * cp, sy * cp, -sp);
  e.col(1) = Vec3(-sy, cy, 0);
  e.col(2) = Vec3(0, 0, 1);
  return e;
}

Mat3 euler_rate_map_dot_zyx(const Vec3& rpy, const Vec3& rpy_dot) {
  const double cp = std::cos(rpy.y()), sp = std::sin(rpy.y());
  const double cy = std::cos(rpy.z()), sy = std::sin(rpy.z());
  const double dp = rpy_dot.y(), dy = rpy_dot.z();
  Mat3 e;
  e.col(0) = Vec3(-sy * dy * cp - cy * sp * dp, cy * dy * cp - sy * sp * dp,
                  -cp * dp);
  e.col(1) = Vec3(-cy * dy, -sy * dy, 0);
  e.col(2) = Vec3::Zero();
  return e;
}

}  // namespace

GeneralizedState GeneralizedState::zero(const RobotModel& model) {
  GeneralizedState s;
  s.q_joint = VecX::Zero(model.joint_count());
  s.u = VecX::Zero(model.nu());
  return s;
}

VecX GeneralizedState::q() const {
  VecX q(6 + q_joint.size());
  q.head<3>() = head_position;
  q.segment<3>(3) = head_euler;
  q.tail(q_joint.size()) = q_joint;
  return q;
}

void GeneralizedState::set_q(const VecX& q) {
  head_position = q.head<3>();
  head_euler = q.segment<3>(3);
  q_joint = q.tail(q.size() - 6);
}

Mat3 GeneralizedState::head_rotation() const {
  return euler_zyx_to_rotation(head_euler) * orientation_ref.toRotationMatrix();
}

void GeneralizedState::rechart() {
  const Mat3 r = head_rotation();
  const Vec3 omega = euler_rate_map_zyx(head_euler) * u.segment<3>(3);
  orientation_ref = Quat(r);
  orientation_ref.normalize();
  head_euler.setZero();
  u.segment<3>(3) = omega;  // E(0) = I
}

ChainKinematics::ChainKinematics(const RobotModel& model,
                                 const GeneralizedState& state)
    : model_(&model) {
  const int n = model.link_count();
  poses_.resize(n);
  omega_.resize(n);
  v_com_.resize(n);
  alpha_vp_.resize(n);
  a_com_vp_.resize(n);
  inertia_world_.resize(n);
  joint_pos_.resize(model.joint_count());
  joint_axis_.resize(model.joint_count());

  e_map_ = euler_rate_map_zyx(state.head_euler);
  e_map_dot_ = euler_rate_map_dot_zyx(state.head_euler, state.u.segment<3>(3));

  poses_[0].position = state.head_position;
  poses_[0].rotation =
      euler_zyx_to_rotation(state.head_euler) * state.orientation_ref.toRotationMatrix();
  omega_[0] = e_map_ * state.u.segment<3>(3);
  v_com_[0] = state.u.head<3>();
  alpha_vp_[0] = e_map_dot_ * state.u.segment<3>(3);
  a_com_vp_[0] = Vec3::Zero();

  for (int j = 0; j < model.joint_count(); ++j) {
    const LinkParams& lk = model.links[j];
    const LinkParams& lk1 = model.links[j + 1];
    const Vec3 distal_local = Vec3(lk.length, 0, 0) - lk.com_offset;
    joint_pos_[j] = poses_[j].position + poses_[j].rotation * distal_local;
    joint_axis_[j] = poses_[j].rotation * model.joints[j].axis;

    const double qd = state.u(6 + j);
    poses_[j + 1].rotation =
        poses_[j].rotation *
        Eigen::AngleAxisd(state.q_joint(j), model.joints[j].axis).toRotationMatrix();
    poses_[j + 1].position = joint_pos_[j] + poses_[j + 1].rotation * lk1.com_offset;

    omega_[j + 1] = omega_[j] + joint_axis_[j] * qd;
    alpha_vp_[j + 1] = alpha_vp_[j] + omega_[j].cross(joint_axis_[j]) * qd;

    const Vec3 arm_j = joint_pos_[j] - poses_[j].position;
    const Vec3 v_joint = v_com_[j] + omega_[j].cross(arm_j);
    const Vec3 a_joint = a_com_vp_[j] + alpha_vp_[j].cross(arm_j) +
                         omega_[j].cross(omega_[j].cross(arm_j));
    const Vec3 arm_c = poses_[j + 1].position - joint_pos_[j];
    v_com_[j + 1] = v_joint + omega_[j + 1].cross(arm_c);
    a_com_vp_[j + 1] = a_joint + alpha_vp_[j + 1].cross(arm_c) +
                       omega_[j + 1].cross(omega_[j + 1].cross(arm_c));
  }

  for (int k = 0; k < n; ++k) {
    const Mat3& r = poses_[k].rotation;
    inertia_world_[k] = r * model.links[k].principal_inertia.asDiagonal() * r.transpose();
  }
}

Vec3 ChainKinematics::point_velocity(int link, const Vec3& world_point) const {
  return v_com_[link] + omega_[link].cross(world_point - poses_[link].position);
}

Vec3 ChainKinematics::point_acceleration_vp(int link, const Vec3& world_point) const {
  const Vec3 r = world_point - poses_[link].position;
  return a_com_vp_[link] + alpha_vp_[link].cross(r) +
         omega_[link].cross(omega_[link].cross(r));
}

MatX ChainKinematics::point_jacobian(int link, const Vec3& world_point) const {
  MatX j = MatX::Zero(3, nu());
  j.block<3, 3>(0, 0).setIdentity();
  const Vec3 lever = world_point - poses_[0].position;
  for (int c = 0; c < 3; ++c)
    j.col(3 + c) = Vec3(e_map_.col(c)).cross(lever);
  for (int jj = 0; jj < link; ++jj)
    j.col(6 + jj) = joint_axis_[jj].cross(world_point - joint_pos_[jj]);
  return j;
}

MatX ChainKinematics::link_angular_jacobian(int link) const {
  MatX j = MatX::Zero(3, nu());
  j.block<3, 3>(0, 3) = e_map_;
  for (int jj = 0; jj < link; ++jj) j.col(6 + jj) = joint_axis_[jj];
  return j;
}

Vec3 ChainKinematics::com_position() const {
  Vec3 c = Vec3::Zero();
  for (int k = 0; k < model_->link_count(); ++k)
    c += model_->links[k].mass * poses_[k].position;
  return c / model_->total_mass();
}

Vec3 ChainKinematics::com_velocity() const {
  Vec3 c = Vec3::Zero();
  for (int k = 0; k < model_->link_count(); ++k)
    c += model_->links[k].mass * v_com_[k];
  return c / model_->total_mass();
}

double ChainKinematics::kinetic_energy() const {
  double t = 0.0;
  for (int k = 0; k < model_->link_count(); ++k) {
    t += 0.5 * model_->links[k].mass * v_com_[k].squaredNorm();
    t += 0.5 * omega_[k].dot(inertia_world_[k] * omega_[k]);
  }
  return t;
}

double ChainKinematics::potential_energy(const Vec3& gravity) const {
  double v = 0.0;
  for (int k = 0; k < model_->link_count(); ++k)
    v -= model_->links[k].mass * gravity.dot(poses_[k].position);
  return v;
}

Vec3 ChainKinematics::angular_momentum_about_com() const {
  const Vec3 rc = com_position();
  const Vec3 vc = com_velocity();
  Vec3 l = Vec3::Zero();
  for (int k = 0; k < model_->link_count(); ++k) {
    const double m = model_->links[k].mass;
    l += m * (poses_[k].position - rc).cross(v_com_[k] - vc);
    l += inertia_world_[k] * omega_[k];
  }
  return l;
}

MatX ChainKinematics::angular_momentum_matrix() const {
  const Vec3 rc = com_position();
  MatX k_map = MatX::Zero(3, nu());
  for (int k = 0; k < model_->link_count(); ++k) {
    const double m = model_->links[k].mass;
    k_map += m * skew(poses_[k].position - rc) * point_jacobian(k, poses_[k].position);
    k_map += inertia_world_[k] * link_angular_jacobian(k);
  }
  // the head-translation columns cancel through the centroid identity
  k_map.leftCols<3>().setZero();
  return k_map;
}

MatX mass_matrix(const ChainKinematics& kin) {
  const RobotModel& model = kin.model();
  const int n = model.nu();
  MatX m = MatX::Zero(n, n);
  for (int k = 0; k < model.link_count(); ++k) {
    const MatX jv = kin.point_jacobian(k, kin.poses()[k].position);
    const MatX jw = kin.link_angular_jacobian(k);
    m.noalias() += model.links[k].mass * jv.transpose() * jv;
    m.noalias() += jw.transpose() * kin.inertia_world(k) * jw;
  }
  return 0.5 * (m + m.transpose());
}

MatX mass_matrix(const RobotModel& model, const GeneralizedState& state) {
  check_gimbal(state);
  ChainKinematics kin(model, state);
  return mass_matrix(kin);
}

VecX bias_vector(const ChainKinematics& kin, const VecX& tau,
                 const Vec3& gravity) {
  const RobotModel& model = kin.model();
  const int n = kin.nu();
  VecX h = VecX::Zero(n);
  for (int k = 0; k < model.link_count(); ++k) {
    const double m = model.links[k].mass;
    const MatX jv = kin.point_jacobian(k, kin.poses()[k].position);
    const MatX jw = kin.link_angular_jacobian(k);
    // gravity minus velocity-product inertial forces
    const Vec3 f = m * gravity - m * kin.a_com_vp(k);
    const Vec3 n_mom = -(kin.inertia_world(k) * kin.alpha_vp(k) +
                         kin.omega(k).cross(kin.inertia_world(k) * kin.omega(k)));
    h.noalias() += jv.transpose() * f;
    h.noalias() += jw.transpose() * n_mom;
  }
  h.tail(model.joint_count()) += tau;
  return h;
}

VecX bias_forces(const RobotModel& model, const GeneralizedState& state,
                 const VecX& tau, const Vec3& gravity) {
  check_gimbal(state);
  if (tau.size() != model.joint_count())
    throw ValidationError("tau: expected size " + std::to_string(model.joint_count()));
  for (int j = 0; j < model.joint_count(); ++j)
    if (std::abs(tau(j)) > model.joints[j].torque_peak + 1e-9)
      throw ValidationError("tau[" + std::to_string(j) + "]: exceeds torque_peak");
  ChainKinematics kin(model, state);
  return bias_vector(kin, tau, gravity);
}

MatX contact_jacobian(const RobotModel& model, const GeneralizedState& state,
                      const ContactCandidate& point) {
  if (point.link < 0 || point.link >= model.link_count())
    throw ValidationError("point.link: out of range");
  ChainKinematics kin(model, state);
  const Pose& pose = kin.poses()[point.link];
  return kin.point_jacobian(point.link, pose.position + pose.rotation * point.local);
}

namespace {

Eigen::LDLT<MatX> checked_ldlt(const MatX& m, const char* what) {
  Eigen::LDLT<MatX> ldlt(m);
  const VecX d = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || d.minCoeff() <= 0 ||
      d.minCoeff() < 1e-12 * d.maxCoeff())
    throw SingularityError(std::string(what) + ": numerically singular");
  return ldlt;
}

}  // namespace

VecX forward_dynamics(const RobotModel& model, const GeneralizedState& state,
                      const VecX& tau, const std::vector<PointForce>& forces,
                      const Vec3& gravity) {
  check_gimbal(state);
  ChainKinematics kin(model, state);
  VecX rhs = bias_vector(kin, tau, gravity);
  for (const PointForce& pf : forces) {
    const MatX j = kin.point_jacobian(pf.link, pf.world_point);
    rhs.noalias() += j.transpose() * pf.force;
  }
  const MatX m = mass_matrix(model, state);
  return checked_ldlt(m, "mass matrix").solve(rhs);
}

TumblingBlocks partition_tumbling(const RobotModel& model,
                                  const GeneralizedState& state,
                                  const Vec3& gravity) {
  const int nj = model.joint_count();
  const MatX m = mass_matrix(model, state);
  TumblingBlocks b;
  b.m_hh = m.topLeftCorner(6, 6);
  b.m_hj = m.topRightCorner(6, nj);
  b.m_jh = m.bottomLeftCorner(nj, 6);
  b.m_jj = m.bottomRightCorner(nj, nj);
  auto hh = checked_ldlt(b.m_hh, "M_HH");
  b.m_prime = b.m_jj - b.m_jh * hh.solve(b.m_hj);
  b.m_prime = 0.5 * (b.m_prime + b.m_prime.transpose());
  ChainKinematics kin(model, state);
  b.h_j = bias_vector(kin, VecX::Zero(nj), gravity).tail(nj);
  return b;
}

TumblingState make_tumbling_state(const RobotModel& model,
                                  const GeneralizedState& state) {
  ChainKinematics kin(model, state);
  TumblingState t;
  t.q_joint = state.q_joint;
  t.u_joint = state.u.tail(model.joint_count());
  t.head_euler = state.head_euler;
  t.orientation_ref = state.orientation_ref;
  t.sigma_cm = kin.angular_momentum_about_com();
  t.com_position = kin.com_position();
  t.com_velocity = kin.com_velocity();
  return t;
}

GeneralizedState reconstruct_full_state(const RobotModel& model,
                                        const TumblingState& tstate) {
  GeneralizedState st;
  st.head_euler = tstate.head_euler;
  st.orientation_ref = tstate.orientation_ref;
  st.q_joint = tstate.q_joint;
  st.u = VecX::Zero(model.nu());
  st.head_position = Vec3::Zero();

  // place the head so the chain centroid lands on the stored CoM
  {
    ChainKinematics kin0(model, st);
    st.head_position = tstate.com_position - kin0.com_position();
  }

  // recover head rates from the momentum variables
  st.u.tail(model.joint_count()) = tstate.u_joint;
  ChainKinematics kin(model, st);
  const MatX k_map = kin.angular_momentum_matrix();
  const Mat3 k_phi = k_map.block<3, 3>(0, 3);
  const Vec3 rhs = tstate.sigma_cm - k_map.rightCols(model.joint_count()) * tstate.u_joint;
  Eigen::FullPivLU<Mat3> lu(k_phi);
  if (!lu.isInvertible())
    throw SingularityError("K_phi: orientation momentum map singular");
  const Vec3 euler_rates = lu.solve(rhs);
  st.u.segment<3>(3) = euler_rates;

  // CoM velocity fixes the head translation rate
  MatX j_cm = MatX::Zero(3, model.nu());
  for (int k = 0; k < model.link_count(); ++k)
    j_cm += model.links[k].mass * kin.point_jacobian(k, kin.poses()[k].position);
  j_cm /= model.total_mass();
  VecX u_partial = st.u;
  u_partial.head<3>().setZero();
  st.u.head<3>() = tstate.com_velocity - j_cm * u_partial;
  return st;
}

TumblingDerivative tumbling_state_derivative(const RobotModel& model,
                                             const TumblingState& tstate,
                                             const VecX& tau,
                                             const std::vector<PointForce>& forces,
                                             const Vec3& gravity) {
  const GeneralizedState st = reconstruct_full_state(model, tstate);
  check_gimbal(st);
  ChainKinematics kin(model, st);
  const int nj = model.joint_count();

  const MatX m = mass_matrix(model, st);
  const MatX m_hh = m.topLeftCorner(6, 6);
  const MatX m_jh = m.bottomLeftCorner(nj, 6);
  const MatX m_jj = m.bottomRightCorner(nj, nj);
  auto hh = checked_ldlt(m_hh, "M_HH");
  MatX m_prime = m_jj - m_jh * hh.solve(m.topRightCorner(6, nj));
  m_prime = 0.5 * (m_prime + m_prime.transpose());

  VecX h = bias_vector(kin, tau, gravity);
  VecX rhs_h = h.head(6);
  VecX rhs_j = h.tail(nj);
  Vec3 sigma_dot = Vec3::Zero();
  Vec3 f_total = Vec3::Zero();
  const Vec3 rc = kin.com_position();
  for (const PointForce& pf : forces) {
    const MatX j = kin.point_jacobian(pf.link, pf.world_point);
    rhs_h.noalias() += j.leftCols(6).transpose() * pf.force;
    rhs_j.noalias() += j.rightCols(nj).transpose() * pf.force;
    sigma_dot += (pf.world_point - rc).cross(pf.force);
    f_total += pf.force;
  }

  TumblingDerivative d;
  d.q_joint_dot = tstate.u_joint;
  d.u_joint_dot =
      checked_ldlt(m_prime, "M'").solve(rhs_j - m_jh * hh.solve(rhs_h));
  d.head_euler_dot = st.u.segment<3>(3);
  d.sigma_cm_dot = sigma_dot;
  d.com_position_dot = tstate.com_velocity;
  d.com_velocity_dot = gravity + f_total / model.total_mass();
  return d;
}

}  // namespace cobra
