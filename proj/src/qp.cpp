#include "cobra/qp.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <vector>

namespace cobra {

namespace {

struct CoreResult {
  VecX x;
  std::vector<int> working;
  VecX working_multipliers;
  bool optimal = false;
  int iterations = 0;
};

// Primal active-set iteration with hard equalities. x0 must satisfy the
// inequalities; equality residuals are preserved from x0 (steps stay in the
// null space of a_eq).
CoreResult active_set_core(const MatX& h, const VecX& c, const MatX& a_eq,
                           const MatX& a_in, const VecX& b_in, const VecX& x0,
                           const QpOptions& options) {
  const int ne = static_cast<int>(a_eq.rows());
  const int ni = static_cast<int>(a_in.rows());

  Eigen::LLT<MatX> h_llt(h);
  if (h_llt.info() != Eigen::Success)
    throw ValidationError("qp: H must be positive definite");

  CoreResult res;
  VecX z = x0;
  std::vector<int> working;
  std::vector<bool> in_working(ni, false);

  const bool debug = std::getenv("QP_DEBUG") != nullptr;
  int iter = 0;
  int last_dropped = -1;
  int stall_count = 0;
  for (; iter < options.max_iterations; ++iter) {
    const int nw = static_cast<int>(working.size());
    const VecX grad = h * z + c;
    if (debug && iter % 50 == 0)
      std::fprintf(stderr, "qp iter=%d nw=%d obj=%.10g\n", iter, nw,
                   0.5 * z.dot(h * z) + c.dot(z));

    VecX p;
    VecX lambda;
    if (ne + nw > 0) {
      MatX cmat(ne + nw, z.size());
      if (ne > 0) cmat.topRows(ne) = a_eq;
      for (int k = 0; k < nw; ++k) cmat.row(ne + k) = a_in.row(working[k]);
      const MatX h_inv_ct = h_llt.solve(cmat.transpose());
      MatX s = cmat * h_inv_ct;
      s.diagonal().array() += 1e-10 * std::max(1.0, s.diagonal().maxCoeff());
      lambda = s.ldlt().solve(-cmat * h_llt.solve(grad));
      p = -h_llt.solve(grad + cmat.transpose() * lambda);
    } else {
      p = -h_llt.solve(grad);
      lambda.resize(0);
    }

    const double mult_tol =
        lambda.size() > 0 ? 1e-8 * (1.0 + lambda.lpNorm<Eigen::Infinity>())
                          : 1e-9;
    if (p.lpNorm<Eigen::Infinity>() <
        options.tol * (1.0 + z.lpNorm<Eigen::Infinity>())) {
      // stationary on the working set; release an over-tight constraint
      // (Bland's lowest-index rule after a grace period prevents cycling)
      int drop = -1;
      const bool bland = iter > options.max_iterations / 2;
      double most_negative = -mult_tol;
      for (int k = 0; k < nw; ++k) {
        const double mult = lambda(ne + k);
        if (mult >= most_negative) continue;
        if (bland) {
          if (drop < 0 || working[k] < working[drop]) drop = k;
        } else {
          most_negative = mult;
          drop = k;
        }
      }
      if (drop < 0) {
        res.optimal = true;
        res.working_multipliers = VecX::Zero(nw);
        for (int k = 0; k < nw; ++k)
          res.working_multipliers(k) = std::max(0.0, lambda(ne + k));
        break;
      }
      last_dropped = working[drop];
      in_working[working[drop]] = false;
      working.erase(working.begin() + drop);
      continue;
    }

    double alpha = 1.0;
    int blocker = -1;
    for (int i = 0; i < ni; ++i) {
      if (in_working[i]) continue;
      const double ap = a_in.row(i) * p;
      if (ap <= 1e-14) continue;
      const double slack = b_in(i) - a_in.row(i) * z;
      const double a = std::max(0.0, slack) / ap;
      if (a < alpha - 1e-15) {
        alpha = a;
        blocker = i;
      }
    }
    // re-blocking a just-released row at zero step means the point is a
    // degenerate optimum up to roundoff; accept it
    if (blocker >= 0 && blocker == last_dropped && alpha < 1e-14) {
      if (++stall_count > 3) {
        res.optimal = true;
        res.working_multipliers = VecX::Zero(nw);
        for (int k = 0; k < nw; ++k)
          res.working_multipliers(k) = std::max(0.0, lambda(ne + k));
        break;
      }
    } else if (alpha > 1e-14) {
      stall_count = 0;
    }
    z += alpha * p;
    if (blocker >= 0) {
      working.push_back(blocker);
      in_working[blocker] = true;
    }
  }

  res.x = z;
  res.iterations = iter;
  res.working = working;
  if (res.working_multipliers.size() !=
      static_cast<Eigen::Index>(working.size()))
    res.working_multipliers = VecX::Zero(working.size());
  return res;
}

}  // namespace

QpResult solve_qp(const QpProblem& problem, const VecX& x0,
                  const QpOptions& options) {
  const int nx = static_cast<int>(problem.h.rows());
  const int ne = static_cast<int>(problem.a_eq.rows());
  const int ni = static_cast<int>(problem.a_in.rows());
  if (x0.size() != nx) throw ValidationError("qp: x0 size mismatch");
  for (int i = 0; i < ni; ++i)
    if (problem.a_in.row(i) * x0 > problem.b_in(i) + 1e-9)
      throw ValidationError("qp: x0 violates inequality " + std::to_string(i));

  QpResult result;
  VecX x_start = x0;

  if (ne > 0) {
    // phase one: least equality violation within the inequality set
    const double scale = std::max(1.0, problem.a_eq.squaredNorm() / ne);
    MatX h1 = problem.a_eq.transpose() * problem.a_eq;
    h1.diagonal().array() += 1e-10 * scale;
    const VecX c1 = -problem.a_eq.transpose() * problem.b_eq;
    const CoreResult phase1 = active_set_core(h1, c1, MatX(0, nx), problem.a_in,
                                              problem.b_in, x0, options);
    x_start = phase1.x;
    const VecX residual = problem.b_eq - problem.a_eq * x_start;
    const double tol =
        options.eq_tol * (1.0 + problem.b_eq.lpNorm<Eigen::Infinity>());
    if (residual.lpNorm<Eigen::Infinity>() > tol) {
      result.x = x_start;
      result.eq_residual = residual;
      result.eq_feasible = false;
      result.optimal = phase1.optimal;
      result.iterations = phase1.iterations;
      result.objective =
          0.5 * x_start.dot(problem.h * x_start) + problem.c.dot(x_start);
      result.ineq_multipliers = VecX::Zero(ni);
      return result;
    }
  }

  const CoreResult phase2 =
      active_set_core(problem.h, problem.c, problem.a_eq, problem.a_in,
                      problem.b_in, x_start, options);
  result.x = phase2.x;
  result.eq_residual = problem.b_eq - problem.a_eq * phase2.x;
  result.eq_feasible = true;
  result.optimal = phase2.optimal;
  result.iterations = phase2.iterations;
  result.objective =
      0.5 * phase2.x.dot(problem.h * phase2.x) + problem.c.dot(phase2.x);
  result.ineq_multipliers = VecX::Zero(ni);
  for (size_t k = 0; k < phase2.working.size(); ++k)
    result.ineq_multipliers(phase2.working[k]) = phase2.working_multipliers(k);
  return result;
}

}  // namespace cobra
