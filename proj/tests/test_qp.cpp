#include <random>

#include "cobra/qp.hpp"
#include "doctest.h"

using namespace cobra;

TEST_CASE("unconstrained minimum") {
  QpProblem p;
  p.h = 2.0 * MatX::Identity(2, 2);
  p.c = VecX::Zero(2);
  p.c << -2.0, -4.0;
  p.a_eq = MatX(0, 2);
  p.b_eq = VecX(0);
  p.a_in = MatX(0, 2);
  p.b_in = VecX(0);
  const QpResult r = solve_qp(p, VecX::Zero(2));
  REQUIRE(r.optimal);
  CHECK(r.x(0) == doctest::Approx(1.0));
  CHECK(r.x(1) == doctest::Approx(2.0));
}

TEST_CASE("equality constraint is honored through the slack penalty") {
  QpProblem p;
  p.h = MatX::Identity(2, 2);
  p.c = VecX::Zero(2);
  p.a_eq = MatX(1, 2);
  p.a_eq << 1.0, 1.0;
  p.b_eq = VecX::Constant(1, 2.0);
  p.a_in = MatX(0, 2);
  p.b_in = VecX(0);
  const QpResult r = solve_qp(p, VecX::Zero(2));
  REQUIRE(r.optimal);
  CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.x(1) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.eq_residual.lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("active box constraints") {
  // minimize (x-3)^2 + (y+1)^2 with x <= 1, y >= 0
  QpProblem p;
  p.h = 2.0 * MatX::Identity(2, 2);
  p.c = VecX(2);
  p.c << -6.0, 2.0;
  p.a_eq = MatX(0, 2);
  p.b_eq = VecX(0);
  p.a_in = MatX(2, 2);
  p.a_in << 1, 0, 0, -1;
  p.b_in = VecX(2);
  p.b_in << 1.0, 0.0;
  const QpResult r = solve_qp(p, VecX::Zero(2));
  REQUIRE(r.optimal);
  CHECK(r.x(0) == doctest::Approx(1.0));
  CHECK(r.x(1) == doctest::Approx(0.0));
  CHECK(r.ineq_multipliers(0) > 0.0);
}

TEST_CASE("infeasible start is rejected") {
  QpProblem p;
  p.h = MatX::Identity(1, 1);
  p.c = VecX::Zero(1);
  p.a_eq = MatX(0, 1);
  p.b_eq = VecX(0);
  p.a_in = MatX(1, 1);
  p.a_in << 1.0;
  p.b_in = VecX::Constant(1, -1.0);
  CHECK_THROWS_AS(solve_qp(p, VecX::Zero(1)), ValidationError);
}

TEST_CASE("random QPs agree with projected coordinate descent") {
  std::mt19937 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 4;
    MatX a = MatX::NullaryExpr(n, n, [&]() { return g(rng); });
    QpProblem p;
    p.h = a.transpose() * a + 0.5 * MatX::Identity(n, n);
    p.c = VecX::NullaryExpr(n, [&]() { return g(rng); });
    p.a_eq = MatX(0, n);
    p.b_eq = VecX(0);
    // box: -1 <= x <= 1
    p.a_in = MatX(2 * n, n);
    p.b_in = VecX::Ones(2 * n);
    p.a_in.topRows(n) = MatX::Identity(n, n);
    p.a_in.bottomRows(n) = -MatX::Identity(n, n);

    const QpResult r = solve_qp(p, VecX::Zero(n));
    REQUIRE(r.optimal);

    // slow but simple oracle: projected coordinate descent to convergence
    VecX x = VecX::Zero(n);
    for (int sweep = 0; sweep < 20000; ++sweep) {
      for (int i = 0; i < n; ++i) {
        double num = p.c(i);
        for (int j = 0; j < n; ++j)
          if (j != i) num += p.h(i, j) * x(j);
        x(i) = std::clamp(-num / p.h(i, i), -1.0, 1.0);
      }
    }
    CHECK((r.x - x).lpNorm<Eigen::Infinity>() < 1e-6);
  }
}
