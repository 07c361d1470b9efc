#include <cmath>
#include <fstream>
#include <random>

#include "cobra/contact.hpp"
#include "cobra/scenario.hpp"
#include "doctest.h"

using namespace cobra;

namespace {

Heightmap sample_heightmap() {
  Heightmap h;
  h.ncols = 3;
  h.nrows = 3;
  h.xllcorner = 0.0;
  h.yllcorner = 0.0;
  h.cellsize = 0.2;
  h.nodata = -9999;
  // rows are top-down: y = 0.4 row first
  h.heights = {0.2, 0.2, 0.3,   // y = 0.4
               0.0, 0.1, 0.2,   // y = 0.2
               0.0, 0.0, 0.1};  // y = 0.0
  return h;
}

}  // namespace

TEST_CASE("gap against the flat plane and incline") {
  const Terrain flat = FlatPlane{0.0};
  const GapResult r = gap(flat, Vec3(0, 0, 0.05), 0.05);
  CHECK(r.g == doctest::Approx(0.0));
  CHECK(r.normal.isApprox(Vec3::UnitZ()));

  InclinedPlane inc;
  inc.angle = deg2rad(24.0);
  inc.downhill = Vec2(1, 0);
  const Terrain terrain = inc;
  const Vec3 n = terrain_normal(terrain, 0, 0);
  CHECK(n.z() == doctest::Approx(std::cos(inc.angle)));
  // lift a surface point 0.1 m along the normal; capsule of radius 0.05
  const Vec3 surface(0.3, 0.0, -std::tan(inc.angle) * 0.3);
  const GapResult r2 = gap(terrain, surface + 0.1 * n, 0.05);
  CHECK(r2.g == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("heightmap bilinear interpolation and bounds") {
  const Terrain terrain = sample_heightmap();
  // cell center of the lower-left cell: corners 0, 0, 0, 0.1
  const double h = terrain_surface_height(terrain, 0.1, 0.1);
  CHECK(h == doctest::Approx((0.0 + 0.0 + 0.0 + 0.1) / 4.0));
  const GapResult r = gap(terrain, Vec3(0.1, 0.1, 0.5), 0.0);
  CHECK(r.g == doctest::Approx(0.5 - h));
  CHECK_THROWS_AS(gap(terrain, Vec3(5, 0, 0), 0.0), IoError);
}

TEST_CASE("heightmap file round trip") {
  const std::string path = "test_heightmap.asc";
  {
    std::ofstream out(path);
    out << "ncols 3\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 0.2\n"
           "NODATA_value -9999\n"
           "0.2 0.2 0.3\n0.0 0.1 0.2\n0.0 0.0 0.1\n";
  }
  const Heightmap h = load_heightmap(path);
  CHECK(h.ncols == 3);
  CHECK(h.at(0, 2) == doctest::Approx(0.3));
  const Terrain t = h;
  CHECK(terrain_surface_height(t, 0.1, 0.1) ==
        doctest::Approx(terrain_surface_height(sample_heightmap(), 0.1, 0.1)));
  CHECK_THROWS_AS(load_heightmap("missing_file.asc"), IoError);
}

TEST_CASE("gap rates match finite differences along the trajectory") {
  const RobotModel model = build_cobra_model();
  std::mt19937 rng(31);
  std::normal_distribution<double> vel(0.0, 0.6);
  std::uniform_real_distribution<double> angle(-0.8, 0.8);

  std::vector<Terrain> terrains;
  terrains.push_back(FlatPlane{-0.3});
  InclinedPlane inc;
  inc.angle = deg2rad(15.0);
  inc.downhill = Vec2(0, 1);
  inc.height = -0.5;
  terrains.push_back(inc);

  for (const Terrain& terrain : terrains) {
    for (int trial = 0; trial < 40; ++trial) {
      GeneralizedState st = GeneralizedState::zero(model);
      st.head_position = Vec3(0.1, 0.2, 0.6);
      st.head_euler = Vec3(angle(rng), angle(rng), angle(rng));
      for (int j = 0; j < 11; ++j) st.q_joint(j) = angle(rng);
      for (int i = 0; i < 17; ++i) st.u(i) = vel(rng);

      const auto cands = contact_candidates(model, st.q(), st.orientation_ref);
      const ContactCandidate& c = cands[trial % cands.size()];
      const GapResult r = gap_rates(model, st, c, terrain, 0.0);

      const double eps = 1e-7;
      auto gap_at = [&](double h) {
        GeneralizedState s = st;
        s.set_q(st.q() + h * st.u);
        auto poses = forward_kinematics(model, s.q(), s.orientation_ref);
        const Vec3 p = poses[c.link].position + poses[c.link].rotation * c.local;
        return gap(terrain, p, 0.0).g;
      };
      const double fd = (gap_at(eps) - gap_at(-eps)) / (2 * eps);
      CHECK(r.w_row.dot(st.u) == doctest::Approx(fd).epsilon(1e-6));
      CHECK(r.zeta == 0.0);

      // zeta_hat captures the u-dot independent part of the gap acceleration;
      // the second difference needs a wider stencil to stay above roundoff
      const double eps2 = 1e-4;
      const double fd2 =
          (gap_at(eps2) - 2 * gap_at(0) + gap_at(-eps2)) / (eps2 * eps2);
      CHECK(r.zeta_hat == doctest::Approx(fd2).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("static state has zero gap rate") {
  const RobotModel model = build_cobra_model();
  GeneralizedState st = GeneralizedState::zero(model);
  st.head_position.z() = 0.02;
  const auto cands = contact_candidates(model, st.q(), st.orientation_ref);
  const GapResult r = gap_rates(model, st, cands[4], FlatPlane{0.0});
  CHECK(r.w_row.dot(st.u) == 0.0);
}

TEST_CASE("delassus operator") {
  SUBCASE("point mass with one vertical contact") {
    MatX m = 2.5 * MatX::Identity(3, 3);
    MatX j(1, 3);
    j << 0, 0, 1;
    const MatX g = delassus(j, m);
    CHECK(g(0, 0) == doctest::Approx(1.0 / 2.5));
  }
  SUBCASE("two contacts on a rigid bar against a dense oracle") {
    // planar bar: coordinates (x, z, theta), mass 2 kg, inertia 0.1
    MatX m = MatX::Zero(3, 3);
    m.diagonal() << 2.0, 2.0, 0.1;
    MatX j(2, 3);
    // vertical contacts at the two ends (lever 0.4 m)
    j << 0, 1, -0.4, 0, 1, 0.4;
    const MatX g = delassus(j, m);
    const MatX expected = j * m.inverse() * j.transpose();
    CHECK((g - expected).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((g - g.transpose()).lpNorm<Eigen::Infinity>() < 1e-12);
    Eigen::SelfAdjointEigenSolver<MatX> es(g);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);
  }
  SUBCASE("positive semidefinite on random stacks") {
    const RobotModel model = build_cobra_model();
    GeneralizedState st = GeneralizedState::zero(model);
    st.head_position.z() = 0.05;
    const MatX m = mass_matrix(model, st);
    const auto cands = contact_candidates(model, st.q(), st.orientation_ref);
    MatX jc(12, 17);
    for (int i = 0; i < 12; ++i) {
      const MatX j = contact_jacobian(model, st, cands[3 * i]);
      jc.row(i) = Vec3::UnitZ().transpose() * j;
    }
    const MatX g = delassus(jc, m);
    CHECK((g - g.transpose()).lpNorm<Eigen::Infinity>() < 1e-10);
    Eigen::SelfAdjointEigenSolver<MatX> es(g);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);
  }
}

TEST_CASE("normal force law") {
  const ContactParams p = ContactParams::stiff();
  CHECK(normal_force(0.01, 0.0, p) == 0.0);
  // full engagement: pure spring
  CHECK(normal_force(-0.01, 0.0, p) == doctest::Approx(100.0));
  // shallow contact, strongly separating: clamped at zero (no adhesion)
  CHECK(normal_force(-1e-4, 10.0, p) == 0.0);
  // loading adds damping
  CHECK(normal_force(-0.01, -1.0, p) > normal_force(-0.01, 0.0, p));
}

TEST_CASE("normal force is continuous across the transition") {
  const ContactParams p = ContactParams::stiff();
  // a dense sweep may move at most Lipschitz * step per sample; a genuine
  // discontinuity would jump by hundreds of newtons
  const double lipschitz = 4.0 * (p.k_n + p.d_n * 0.5 / p.transition_width);
  for (double g_dot : {-0.5, 0.0, 0.4}) {
    double prev = normal_force(2 * p.transition_width, g_dot, p);
    for (double g = 2 * p.transition_width; g > -3 * p.transition_width;
         g -= 1e-6) {
      const double f = normal_force(g, g_dot, p);
      CHECK(std::abs(f - prev) <= 10.0 * lipschitz * 1e-6);
      prev = f;
    }
  }
  // fine probe around zero gap: slope vanishes with the smoothstep gate
  const double base = normal_force(-1e-9, 0.0, p);
  CHECK(std::abs(normal_force(-2e-9, 0.0, p) - base) < 1e-6);
}

TEST_CASE("friction law: stick-slip shape") {
  const ContactParams p = ContactParams::stiff();
  CHECK(friction_force(Vec2::Zero(), 100.0, p).norm() == 0.0);
  CHECK(friction_force(Vec2(0.5, 0), 0.0, p).norm() == 0.0);

  // kinetic asymptote at 10 v_crit
  const Vec2 f = friction_force(Vec2(10 * p.v_crit, 0), 100.0, p);
  CHECK(f.norm() > 0.95 * 50.0);
  CHECK(f.norm() < 1.05 * 50.0);
  CHECK(f.x() < 0.0);  // opposes motion

  // static peak exactly at v_crit, bounded by mu_s everywhere
  for (double s = 1e-6; s < 20 * p.v_crit; s *= 1.3) {
    const double mag = friction_force(Vec2(s, 0), 100.0, p).norm();
    CHECK(mag <= p.mu_s * 100.0 + 1e-9);
    // dissipative everywhere
    CHECK(friction_force(Vec2(s, 0), 100.0, p).dot(Vec2(s, 0)) <= 0.0);
  }
  const double at_crit = friction_force(Vec2(p.v_crit, 0), 100.0, p).norm();
  CHECK(at_crit == doctest::Approx(p.mu_s * 100.0).epsilon(1e-9));
}

TEST_CASE("resolve_penalty_contacts: hovering, resting and cone feasibility") {
  const RobotModel model = build_cobra_model();
  const ContactParams params = ContactParams::stiff();
  const Terrain flat = FlatPlane{0.0};

  GeneralizedState st = GeneralizedState::zero(model);
  st.head_position.z() = 1.0;
  CHECK(resolve_penalty_contacts(model, st, flat, params).contacts.empty());

  // resting at the static equilibrium depth carries the full weight
  const double depth = straight_rest_penetration(model, params);
  st.head_position.z() = model.links[0].radius - depth;
  const ContactSet set = resolve_penalty_contacts(model, st, flat, params);
  REQUIRE(!set.contacts.empty());
  CHECK(set.total_normal() ==
        doctest::Approx(model.total_mass() * 9.81).epsilon(0.01));
  for (const auto& c : set.contacts) {
    CHECK(c.f_n >= 0.0);
    CHECK(c.f_t.norm() <= params.mu_s * c.f_n + 1e-9);
  }
  // deterministic ordering by (link, point)
  for (size_t i = 1; i < set.contacts.size(); ++i) {
    const auto& a = set.contacts[i - 1];
    const auto& b = set.contacts[i];
    CHECK((a.link < b.link || (a.link == b.link && a.point_index < b.point_index)));
  }
}
