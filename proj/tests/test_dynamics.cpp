#include <cmath>
#include <random>

#include "cobra/dynamics.hpp"
#include "doctest.h"

using namespace cobra;

namespace {

GeneralizedState random_state(const RobotModel& model, std::mt19937& rng,
                              double vel_scale = 1.0) {
  std::uniform_real_distribution<double> pos(-1.0, 1.0);
  std::uniform_real_distribution<double> joint(-1.1, 1.1);
  std::uniform_real_distribution<double> pitch(-1.2, 1.2);
  std::normal_distribution<double> vel(0.0, vel_scale);
  GeneralizedState st = GeneralizedState::zero(model);
  st.head_position = Vec3(pos(rng), pos(rng), pos(rng) + 2.0);
  st.head_euler = Vec3(pos(rng) * 3.0, pitch(rng), pos(rng) * 3.0);
  for (int j = 0; j < model.joint_count(); ++j) st.q_joint(j) = joint(rng);
  for (int i = 0; i < model.nu(); ++i) st.u(i) = vel(rng);
  return st;
}

RobotModel single_link_model() {
  RobotModel m;
  LinkParams l;
  l.mass = 0.60;
  l.principal_inertia = Vec3(7.16707e-4, 8.70397e-4, 8.6286e-4);
  l.length = 1.7 / 12.0;
  l.radius = 0.05;
  l.com_offset = Vec3(l.length / 2.0, 0, 0);
  m.links.push_back(l);
  return m;
}

}  // namespace

TEST_CASE("single free link mass matrix blocks") {
  const RobotModel model = single_link_model();
  GeneralizedState st = GeneralizedState::zero(model);
  const MatX m = mass_matrix(model, st);
  REQUIRE(m.rows() == 6);
  CHECK((m.topLeftCorner(3, 3) - 0.60 * Mat3::Identity()).norm() < 1e-12);
  CHECK(m.topRightCorner(3, 3).norm() < 1e-12);
  const Mat3 rot = m.bottomRightCorner(3, 3);
  Eigen::SelfAdjointEigenSolver<Mat3> es(rot);
  CHECK(es.eigenvalues()(0) == doctest::Approx(7.16707e-4).epsilon(1e-9));
  CHECK(es.eigenvalues()(1) == doctest::Approx(8.6286e-4).epsilon(1e-9));
  CHECK(es.eigenvalues()(2) == doctest::Approx(8.70397e-4).epsilon(1e-9));
}

TEST_CASE("mass matrix is SPD and matches the kinetic-energy oracle") {
  const RobotModel model = build_cobra_model();
  std::mt19937 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const GeneralizedState st = random_state(model, rng);
    const MatX m = mass_matrix(model, st);
    CHECK((m - m.transpose()).lpNorm<Eigen::Infinity>() < 1e-10);
    Eigen::SelfAdjointEigenSolver<MatX> es(m);
    CHECK(es.eigenvalues().minCoeff() > 0.0);

    // independent oracle: per-link velocity propagation
    ChainKinematics kin(model, st);
    const double t_quad = 0.5 * st.u.dot(m * st.u);
    const double t_links = kin.kinetic_energy();
    CHECK(t_quad == doctest::Approx(t_links).epsilon(1e-9));
  }
}

TEST_CASE("mass matrix rejects gimbal-singular states") {
  const RobotModel model = build_cobra_model();
  GeneralizedState st = GeneralizedState::zero(model);
  st.head_euler.y() = kPi / 2.0;
  CHECK_THROWS_AS(mass_matrix(model, st), SingularityError);
}

TEST_CASE("bias forces: gravity, rest, and torque bounds") {
  const RobotModel model = build_cobra_model();
  GeneralizedState st = GeneralizedState::zero(model);
  const VecX tau = VecX::Zero(11);

  const VecX h = bias_forces(model, st, tau, Vec3(0, 0, -9.81));
  CHECK(h(2) == doctest::Approx(-7.2 * 9.81).epsilon(1e-12));
  CHECK(h(0) == doctest::Approx(0.0));
  CHECK(h(1) == doctest::Approx(0.0));

  const VecX h0 = bias_forces(model, st, tau, Vec3::Zero());
  CHECK(h0.lpNorm<Eigen::Infinity>() < 1e-12);

  VecX bad = tau;
  bad(3) = 10.5;
  CHECK_THROWS_AS(bias_forces(model, st, bad, Vec3::Zero()), ValidationError);
}

TEST_CASE("Coriolis skew-symmetry against finite-difference M-dot") {
  const RobotModel model = build_cobra_model();
  std::mt19937 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const GeneralizedState st = random_state(model, rng);
    const VecX b = -bias_forces(model, st, VecX::Zero(11), Vec3::Zero());

    const double eps = 1e-5;
    GeneralizedState plus = st, minus = st;
    plus.set_q(st.q() + eps * st.u);
    minus.set_q(st.q() - eps * st.u);
    const MatX m_dot =
        (mass_matrix(model, plus) - mass_matrix(model, minus)) / (2 * eps);

    const double lhs = st.u.dot(m_dot * st.u);
    const double rhs = 2.0 * st.u.dot(b);
    const double scale = 1.0 + std::abs(lhs);
    CHECK(std::abs(lhs - rhs) / scale < 1e-7);
  }
}

TEST_CASE("contact Jacobians match finite-difference kinematics") {
  const RobotModel model = build_cobra_model();
  std::mt19937 rng(13);
  std::uniform_int_distribution<int> pick_link(0, 11);
  std::uniform_real_distribution<double> off(-0.07, 0.07);
  int checked = 0;
  while (checked < 100) {
    const GeneralizedState st = random_state(model, rng);
    ContactCandidate c;
    c.link = pick_link(rng);
    c.point_index = 0;
    c.local = Vec3(off(rng), off(rng), off(rng));
    const MatX j = contact_jacobian(model, st, c);

    // static chain: point velocity is zero
    GeneralizedState still = st;
    still.u.setZero();
    CHECK((contact_jacobian(model, still, c) * still.u).norm() == 0.0);

    const double eps = 1e-7;
    GeneralizedState plus = st, minus = st;
    plus.set_q(st.q() + eps * st.u);
    minus.set_q(st.q() - eps * st.u);
    auto world_point = [&](const GeneralizedState& s) {
      auto poses = forward_kinematics(model, s.q(), s.orientation_ref);
      return Vec3(poses[c.link].position + poses[c.link].rotation * c.local);
    };
    const Vec3 fd = (world_point(plus) - world_point(minus)) / (2 * eps);
    const Vec3 analytic = j * st.u;
    CHECK((analytic - fd).norm() < 1e-6 * (1.0 + fd.norm()));
    ++checked;
  }
}

TEST_CASE("pure head translation moves every point at the same velocity") {
  const RobotModel model = build_cobra_model();
  std::mt19937 rng(17);
  GeneralizedState st = random_state(model, rng, 0.0);
  st.u.setZero();
  st.u.head<3>() = Vec3(0.7, -0.2, 0.4);
  for (int link = 0; link < 12; link += 3) {
    ContactCandidate c{link, 0, Vec3(0.02, 0.01, -0.05), Vec3::Zero()};
    const Vec3 v = contact_jacobian(model, st, c) * st.u;
    CHECK((v - Vec3(0.7, -0.2, 0.4)).norm() < 1e-12);
  }
}

TEST_CASE("forward dynamics: free fall and static support") {
  const RobotModel model = build_cobra_model();
  GeneralizedState st = GeneralizedState::zero(model);

  SUBCASE("uniform gravity produces no internal motion") {
    const VecX udot =
        forward_dynamics(model, st, VecX::Zero(11), {}, Vec3(0, 0, -9.81));
    CHECK(udot(2) == doctest::Approx(-9.81).epsilon(1e-12));
    CHECK(udot.head<2>().norm() < 1e-10);
    CHECK(udot.segment<3>(3).norm() < 1e-10);
    CHECK(udot.tail(11).lpNorm<Eigen::Infinity>() < 1e-9);
  }

  SUBCASE("a CoM-aligned support force cancels the CoM acceleration") {
    PointForce support;
    support.link = 5;
    // chain CoM sits at the link-5/6 boundary on the axis line
    support.world_point = Vec3(5.5 * 1.7 / 12.0, 0.0, 0.0);
    support.force = Vec3(0, 0, 7.2 * 9.81);
    const VecX udot =
        forward_dynamics(model, st, VecX::Zero(11), {support}, Vec3(0, 0, -9.81));
    // joints may sag, but the center of mass stays put
    ChainKinematics kin(model, st);
    MatX j_cm = MatX::Zero(3, model.nu());
    for (int k = 0; k < model.link_count(); ++k)
      j_cm += model.links[k].mass * kin.point_jacobian(k, kin.poses()[k].position);
    j_cm /= model.total_mass();
    CHECK((j_cm * udot).norm() < 1e-9);
  }
}
