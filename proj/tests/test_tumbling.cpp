#include <cmath>
#include <random>

#include "cobra/contact.hpp"
#include "cobra/dynamics.hpp"
#include "cobra/scenario.hpp"
#include "cobra/sim.hpp"
#include "doctest.h"

using namespace cobra;

namespace {

GeneralizedState hexring_state(const RobotModel& model) {
  GeneralizedState st = GeneralizedState::zero(model);
  st.q_joint = hexring_configuration(model);
  st.head_position = Vec3(0.3, -0.1, 0.8);
  std::mt19937 rng(23);
  std::normal_distribution<double> vel(0.0, 0.5);
  for (int i = 0; i < model.nu(); ++i) st.u(i) = vel(rng);
  return st;
}

VecX pack_tumbling(const TumblingState& t) {
  VecX x(11 + 11 + 3 + 3 + 3 + 3);
  x.segment(0, 11) = t.q_joint;
  x.segment(11, 11) = t.u_joint;
  x.segment<3>(22) = t.head_euler;
  x.segment<3>(25) = t.sigma_cm;
  x.segment<3>(28) = t.com_position;
  x.segment<3>(31) = t.com_velocity;
  return x;
}

TumblingState unpack_tumbling(const TumblingState& like, const VecX& x) {
  TumblingState t = like;
  t.q_joint = x.segment(0, 11);
  t.u_joint = x.segment(11, 11);
  t.head_euler = x.segment<3>(22);
  t.sigma_cm = x.segment<3>(25);
  t.com_position = x.segment<3>(28);
  t.com_velocity = x.segment<3>(31);
  return t;
}

}  // namespace

TEST_CASE("partition blocks reassemble the permuted mass matrix") {
  const RobotModel model = build_cobra_model();
  const GeneralizedState st = hexring_state(model);
  const MatX m = mass_matrix(model, st);
  const TumblingBlocks b = partition_tumbling(model, st);

  MatX reassembled(17, 17);
  reassembled.topLeftCorner(11, 11) = b.m_jj;
  reassembled.topRightCorner(11, 6) = b.m_jh;
  reassembled.bottomLeftCorner(6, 11) = b.m_hj;
  reassembled.bottomRightCorner(6, 6) = b.m_hh;

  MatX permuted(17, 17);
  permuted.topLeftCorner(11, 11) = m.bottomRightCorner(11, 11);
  permuted.topRightCorner(11, 6) = m.bottomLeftCorner(11, 6);
  permuted.bottomLeftCorner(6, 11) = m.topRightCorner(6, 11);
  permuted.bottomRightCorner(6, 6) = m.topLeftCorner(6, 6);
  CHECK((reassembled - permuted).lpNorm<Eigen::Infinity>() == 0.0);

  CHECK((b.m_jh - b.m_hj.transpose()).lpNorm<Eigen::Infinity>() < 1e-10);

  Eigen::SelfAdjointEigenSolver<MatX> es(b.m_prime);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("momentum variables are consistent with the full model") {
  const RobotModel model = build_cobra_model();
  const GeneralizedState st = hexring_state(model);
  const TumblingState t = make_tumbling_state(model, st);

  // independent angular-momentum oracle
  ChainKinematics kin(model, st);
  Vec3 rc = Vec3::Zero(), vc = Vec3::Zero();
  for (int k = 0; k < 12; ++k) {
    rc += model.links[k].mass * kin.poses()[k].position;
    vc += model.links[k].mass * kin.v_com(k);
  }
  rc /= model.total_mass();
  vc /= model.total_mass();
  Vec3 l = Vec3::Zero();
  for (int k = 0; k < 12; ++k) {
    const Mat3 r = kin.poses()[k].rotation;
    const Mat3 iw = r * model.links[k].principal_inertia.asDiagonal() * r.transpose();
    l += model.links[k].mass *
         (kin.poses()[k].position - rc).cross(kin.v_com(k) - vc);
    l += iw * kin.omega(k);
  }
  CHECK((t.sigma_cm - l).norm() < 1e-9);
  CHECK((t.com_position - rc).norm() < 1e-12);
  CHECK((t.com_velocity - vc).norm() < 1e-12);

  // reconstruction runs the map backwards
  const GeneralizedState back = reconstruct_full_state(model, t);
  CHECK((back.q() - st.q()).lpNorm<Eigen::Infinity>() < 1e-9);
  CHECK((back.u - st.u).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("angular momentum is conserved without external forces") {
  const RobotModel model = build_cobra_model();
  const GeneralizedState st = hexring_state(model);
  TumblingState t = make_tumbling_state(model, st);

  const TumblingDerivative d =
      tumbling_state_derivative(model, t, VecX::Zero(11), {}, Vec3(0, 0, -9.81));
  CHECK(d.sigma_cm_dot.norm() == 0.0);
  CHECK((d.com_velocity_dot - Vec3(0, 0, -9.81)).norm() < 1e-12);

  // integrating keeps sigma bit-stable
  VecX x = pack_tumbling(t);
  const double dt = 1e-3;
  for (int k = 0; k < 200; ++k) {
    auto f = [&](const VecX& xx) {
      const TumblingState ts = unpack_tumbling(t, xx);
      const TumblingDerivative dd =
          tumbling_state_derivative(model, ts, VecX::Zero(11), {}, Vec3(0, 0, -9.81));
      VecX out(34);
      out.segment(0, 11) = dd.q_joint_dot;
      out.segment(11, 11) = dd.u_joint_dot;
      out.segment<3>(22) = dd.head_euler_dot;
      out.segment<3>(25) = dd.sigma_cm_dot;
      out.segment<3>(28) = dd.com_position_dot;
      out.segment<3>(31) = dd.com_velocity_dot;
      return out;
    };
    const VecX k1 = f(x);
    const VecX k2 = f(x + 0.5 * dt * k1);
    const VecX k3 = f(x + 0.75 * dt * k2);
    x += dt * (2.0 * k1 + 3.0 * k2 + 4.0 * k3) / 9.0;
  }
  CHECK((x.segment<3>(25) - t.sigma_cm).norm() < 1e-12);
}

TEST_CASE("fixed posture reduces the head rate to the momentum map") {
  const RobotModel model = build_cobra_model();
  GeneralizedState st = hexring_state(model);
  st.u.tail(11).setZero();
  const TumblingState t = make_tumbling_state(model, st);
  const GeneralizedState back = reconstruct_full_state(model, t);
  // with u_J = 0 the Euler rates follow K_phi^-1 sigma alone
  ChainKinematics kin(model, back);
  const MatX k_map = kin.angular_momentum_matrix();
  const Vec3 expect = k_map.block<3, 3>(0, 3).fullPivLu().solve(t.sigma_cm);
  CHECK((back.u.segment<3>(3) - expect).norm() < 1e-9);
}

TEST_CASE("partitioned model tracks full forward dynamics on a slope") {
  const RobotModel model = build_cobra_model();
  InclinedPlane slope;
  slope.angle = deg2rad(10.0);
  slope.downhill = Vec2(0, 1);
  const Terrain terrain = slope;
  const ContactParams contact = ContactParams::stiff();

  GeneralizedState full = make_ring_state(model, terrain, hexring_configuration(model),
                                          Vec2(0, 1), deg2rad(33.0), 0.0);
  TumblingState part = make_tumbling_state(model, full);

  const JointVector hold = hexring_configuration(model);
  PidController pid_full(model), pid_part(model);
  // a step small enough to resolve the face impacts, so the comparison
  // measures the formulation rather than integrator chatter
  const double dt = 2.5e-4;
  const Vec3 gravity(0, 0, -9.81);

  double max_com_err = 0.0;
  for (int k = 0; k < 1600; ++k) {
    const VecX tau_full =
        pid_full.compute(hold, VecX::Zero(11), full.q_joint, full.u.tail(11), dt);
    {
      // full route
      auto f = [&](const GeneralizedState& s) {
        const ContactSet cs = resolve_penalty_contacts(model, s, terrain, contact);
        VecX xd(34);
        xd.head(17) = s.u;
        xd.tail(17) = forward_dynamics(model, s, tau_full, cs.point_forces(), gravity);
        return xd;
      };
      VecX x(34);
      x.head(17) = full.q();
      x.tail(17) = full.u;
      auto advance = [&](const VecX& xx) {
        GeneralizedState s = full;
        s.set_q(xx.head(17));
        s.u = xx.tail(17);
        return f(s);
      };
      const VecX k1 = advance(x);
      const VecX k2 = advance(x + 0.5 * dt * k1);
      const VecX k3 = advance(x + 0.75 * dt * k2);
      x += dt * (2.0 * k1 + 3.0 * k2 + 4.0 * k3) / 9.0;
      full.set_q(x.head(17));
      full.u = x.tail(17);
      if (std::abs(full.head_euler.y()) > 0.9) full.rechart();
    }
    {
      const VecX tau_part =
          pid_part.compute(hold, VecX::Zero(11), part.q_joint, part.u_joint, dt);
      auto f = [&](const TumblingState& ts) {
        const GeneralizedState s = reconstruct_full_state(model, ts);
        const ContactSet cs = resolve_penalty_contacts(model, s, terrain, contact);
        const TumblingDerivative dd =
            tumbling_state_derivative(model, ts, tau_part, cs.point_forces(), gravity);
        VecX out(34);
        out.segment(0, 11) = dd.q_joint_dot;
        out.segment(11, 11) = dd.u_joint_dot;
        out.segment<3>(22) = dd.head_euler_dot;
        out.segment<3>(25) = dd.sigma_cm_dot;
        out.segment<3>(28) = dd.com_position_dot;
        out.segment<3>(31) = dd.com_velocity_dot;
        return out;
      };
      VecX x = pack_tumbling(part);
      auto advance = [&](const VecX& xx) { return f(unpack_tumbling(part, xx)); };
      const VecX k1 = advance(x);
      const VecX k2 = advance(x + 0.5 * dt * k1);
      const VecX k3 = advance(x + 0.75 * dt * k2);
      x += dt * (2.0 * k1 + 3.0 * k2 + 4.0 * k3) / 9.0;
      part = unpack_tumbling(part, x);
      if (std::abs(part.head_euler.y()) > 0.9) {
        GeneralizedState s = reconstruct_full_state(model, part);
        s.rechart();
        TumblingState fresh = make_tumbling_state(model, s);
        part.head_euler = fresh.head_euler;
        part.orientation_ref = fresh.orientation_ref;
      }
    }
    ChainKinematics kin(model, full);
    max_com_err = std::max(max_com_err, (kin.com_position() - part.com_position).norm());
  }
  CHECK(max_com_err < 1e-3);
}
