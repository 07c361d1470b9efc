#pragma once

#include "cobra/types.hpp"

namespace cobra {

// Dense convex QP:  min 1/2 x'Hx + c'x  s.t.  A_eq x = b_eq,  A_in x <= b_in.
// Solved by a two-phase primal active-set method: phase one finds the least
// equality violation subject to the inequalities, phase two optimizes with
// the equalities held exactly. An infeasible problem reports eq_feasible =
// false and returns the least-violating point.
struct QpProblem {
  MatX h;     // positive definite
  VecX c;
  MatX a_eq;  // may have zero rows
  VecX b_eq;
  MatX a_in;  // may have zero rows
  VecX b_in;
};

struct QpOptions {
  double tol = 1e-10;
  double eq_tol = 1e-7;  // scaled by (1 + |b_eq|_inf)
  int max_iterations = 2000;
};

struct QpResult {
  VecX x;
  VecX eq_residual;       // b_eq - A_eq x at the solution
  VecX ineq_multipliers;  // one per inequality row, >= 0 at the optimum
  bool optimal = false;
  bool eq_feasible = true;
  int iterations = 0;
  double objective = 0.0;  // 1/2 x'Hx + c'x
};

// x0 must satisfy the inequalities (up to 1e-9).
QpResult solve_qp(const QpProblem& problem, const VecX& x0,
                  const QpOptions& options = {});

}  // namespace cobra
