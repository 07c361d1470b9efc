#include "cobra/cio.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <future>
#include <sstream>
#include <thread>

namespace cobra {

VecX CioProblem::default_eps_schedule() {
  VecX eps(5);
  eps << 1e-1, 1e-2, 1e-3, 1e-4, 1e-5;
  return eps;
}

void CioProblem::validate() const {
  if (!model) throw ValidationError("cio.model: missing");
  if (!desired_com_accel.allFinite())
    throw ValidationError("cio.desired_com_accel: must be finite");
  if (eps_schedule.size() > 1) {
    for (int i = 1; i < eps_schedule.size(); ++i)
      if (!(eps_schedule(i) < eps_schedule(i - 1)))
        throw ValidationError("cio.eps_schedule: must be strictly decreasing");
  }
  if (eps_schedule.size() > 0 && !(eps_schedule(eps_schedule.size() - 1) > 0))
    throw ValidationError("cio.eps_schedule: must stay positive");
  if (cone_mode == FrictionConeMode::kPolyhedral && facets < 4)
    throw ValidationError("cio.facets: need at least 4");
}

namespace {

struct CandidateData {
  Vec3 world;
  Vec3 normal;
  Vec3 t_u, t_v;
  double g = 0.0;
  double g_dot = 0.0;
  double zeta_hat = 0.0;
  VecX w_row;      // nu
  MatX j_basis;    // nu x 3, J^T * [n t_u t_v]
  bool active = false;  // participates in the acceleration rows
};

}  // namespace

CioSolution solve_cio_step(const CioProblem& problem) {
  problem.validate();
  const RobotModel& model = *problem.model;
  const GeneralizedState& state = problem.state;
  const int nu = model.nu();
  const int nj = model.joint_count();
  const int nc = static_cast<int>(problem.candidates.size());

  ChainKinematics kin(model, state);
  const MatX m = mass_matrix(kin);
  Eigen::LLT<MatX> m_llt(m);
  if (m_llt.info() != Eigen::Success)
    throw SingularityError("cio: mass matrix not positive definite");
  const VecX h0 = bias_vector(kin, VecX::Zero(nj), problem.gravity);
  const VecX udot_free = m_llt.solve(h0);

  std::vector<CandidateData> cand(nc);
  for (int i = 0; i < nc; ++i) {
    const ContactCandidate& cc = problem.candidates[i];
    CandidateData& d = cand[i];
    const Pose& pose = kin.poses()[cc.link];
    d.world = pose.position + pose.rotation * cc.local;
    GapResult gr = gap_rates(model, state, cc, problem.terrain, 0.0);
    d.g = gr.g;
    d.normal = gr.normal;
    d.w_row = gr.w_row;
    d.zeta_hat = gr.zeta_hat;
    d.g_dot = gr.w_row.dot(state.u);
    const Vec3 seed = std::abs(d.normal.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
    d.t_u = seed.cross(d.normal).normalized();
    d.t_v = d.normal.cross(d.t_u);
    const MatX j = kin.point_jacobian(cc.link, d.world);
    d.j_basis.resize(nu, 3);
    d.j_basis.col(0) = j.transpose() * d.normal;
    d.j_basis.col(1) = j.transpose() * d.t_u;
    d.j_basis.col(2) = j.transpose() * d.t_v;
    d.active = d.g <= problem.active_gap_tol && d.g_dot <= problem.active_vel_tol;
  }

  // x = [tau(nj); per-candidate (f_N, f_u, f_v)]
  const int nx = nj + 3 * nc;
  const auto fidx = [&](int i) { return nj + 3 * i; };

  // Delassus of the parameterized forces drives the objective
  MatX g_del = MatX::Zero(3 * nc, 3 * nc);
  std::vector<MatX> minv_jb(nc);
  for (int i = 0; i < nc; ++i) minv_jb[i] = m_llt.solve(cand[i].j_basis);
  for (int i = 0; i < nc; ++i)
    for (int k = 0; k < nc; ++k)
      g_del.block<3, 3>(3 * i, 3 * k) =
          cand[i].j_basis.transpose() * minv_jb[k];
  g_del = 0.5 * (g_del + g_del.transpose());

  // the Delassus block has rank <= nu, so the force regularizer must carry
  // the nullspace; 1e-4 keeps the distortion around 0.1% at contact scale
  MatX h_obj = MatX::Zero(nx, nx);
  const double tau_reg = 1e-4, f_reg = 1e-4;
  h_obj.topLeftCorner(nj, nj) = tau_reg * MatX::Identity(nj, nj);
  h_obj.bottomRightCorner(3 * nc, 3 * nc) =
      g_del + f_reg * MatX::Identity(3 * nc, 3 * nc);

  // equalities: CoM acceleration rows then gap-acceleration rows
  std::vector<int> active_idx;
  for (int i = 0; i < nc; ++i)
    if (cand[i].active) active_idx.push_back(i);
  const int na = static_cast<int>(active_idx.size());
  MatX a_eq = MatX::Zero(3 + na, nx);
  VecX b_eq = VecX::Zero(3 + na);
  const double total_mass = model.total_mass();
  for (int i = 0; i < nc; ++i) {
    a_eq.block<3, 1>(0, fidx(i) + 0) = cand[i].normal;
    a_eq.block<3, 1>(0, fidx(i) + 1) = cand[i].t_u;
    a_eq.block<3, 1>(0, fidx(i) + 2) = cand[i].t_v;
  }
  b_eq.head<3>() = total_mass * (problem.desired_com_accel - problem.gravity);

  const MatX minv_b = m_llt.solve(
      (MatX(nu, nj) << MatX::Zero(6, nj), MatX::Identity(nj, nj)).finished());
  for (int r = 0; r < na; ++r) {
    const CandidateData& d = cand[active_idx[r]];
    a_eq.block(3 + r, 0, 1, nj) = d.w_row.transpose() * minv_b;
    for (int i = 0; i < nc; ++i)
      a_eq.block<1, 3>(3 + r, fidx(i)) = d.w_row.transpose() * minv_jb[i];
    b_eq(3 + r) = -d.zeta_hat - d.w_row.dot(udot_free);
  }

  // inequalities: torque box, unilaterality, complementarity caps, cone facets
  const int n_facets =
      problem.cone_mode == FrictionConeMode::kPolyhedral ? problem.facets : 24;
  // inscribed polygon keeps the second-order cone satisfied exactly
  const double facet_scale = std::cos(kPi / n_facets);
  VecX eps_schedule = problem.eps_schedule.size() > 0
                          ? problem.eps_schedule
                          : CioProblem::default_eps_schedule();

  CioSolution sol;
  sol.complementarity_history = VecX::Zero(eps_schedule.size());
  QpResult qp_last;
  for (int sweep = 0; sweep < eps_schedule.size(); ++sweep) {
    const double eps = eps_schedule(sweep);
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    for (int j = 0; j < nj; ++j) {
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(nx);
      r(j) = 1.0;
      rows.push_back(r);
      rhs.push_back(model.joints[j].torque_peak);
      rows.push_back(-r);
      rhs.push_back(model.joints[j].torque_peak);
    }
    for (int i = 0; i < nc; ++i) {
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(nx);
      r(fidx(i)) = -1.0;  // f_N >= 0
      rows.push_back(r);
      rhs.push_back(0.0);
      if (cand[i].g > 1e-9) {  // relaxed complementarity g f_N <= eps
        Eigen::RowVectorXd rc = Eigen::RowVectorXd::Zero(nx);
        rc(fidx(i)) = 1.0;
        rows.push_back(rc);
        rhs.push_back(eps / cand[i].g);
      }
      for (int k = 0; k < n_facets; ++k) {
        const double th = 2.0 * kPi * k / n_facets;
        Eigen::RowVectorXd rf = Eigen::RowVectorXd::Zero(nx);
        rf(fidx(i) + 1) = std::cos(th);
        rf(fidx(i) + 2) = std::sin(th);
        rf(fidx(i)) = -problem.contact.mu_s * facet_scale;
        rows.push_back(rf);
        rhs.push_back(0.0);
      }
    }
    QpProblem qp;
    qp.h = h_obj;
    qp.c = VecX::Zero(nx);
    qp.a_eq = a_eq;
    qp.b_eq = b_eq;
    qp.a_in.resize(rows.size(), nx);
    qp.b_in.resize(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) {
      qp.a_in.row(r) = rows[r];
      qp.b_in(r) = rhs[r];
    }

    VecX x0 = VecX::Zero(nx);
    for (int i = 0; i < nc; ++i) {
      double cap = cand[i].g > 1e-9 ? eps / cand[i].g : 1.0;
      x0(fidx(i)) = 0.5 * std::min(1.0, cap);
    }
    qp_last = solve_qp(qp, x0);
    if (!qp_last.optimal)
      throw CioConvergenceError("cio: active-set QP hit the iteration cap");

    double comp = 0.0;
    for (int i = 0; i < nc; ++i)
      comp = std::max(comp, std::abs(cand[i].g * qp_last.x(fidx(i))));
    sol.complementarity_history(sweep) = comp;
  }

  // infeasibility: phase one could not zero the equality rows
  if (qp_last.eq_residual.size() > 0) {
    const double com_res = qp_last.eq_residual.head<3>().norm();
    double gap_res = 0.0;
    for (int r = 3; r < qp_last.eq_residual.size(); ++r)
      gap_res = std::max(gap_res, std::abs(qp_last.eq_residual(r)));
    if (!qp_last.eq_feasible || com_res > 1e-5 * (1.0 + b_eq.head<3>().norm()) ||
        gap_res > 1e-4) {
      std::ostringstream msg;
      msg << "cio: infeasible, CoM residual " << com_res << " N, gap residual "
          << gap_res;
      // attribute to the tightest constraint family at the returned point
      std::string family = "com_acceleration";
      double cone_slack = 1e30, cap_slack = 1e30, tau_slack = 1e30;
      for (int i = 0; i < nc; ++i) {
        const double fn = qp_last.x(fidx(i));
        const Vec2 ft(qp_last.x(fidx(i) + 1), qp_last.x(fidx(i) + 2));
        cone_slack = std::min(
            cone_slack, problem.contact.mu_s * facet_scale * fn - ft.norm());
        if (cand[i].g > 1e-9)
          cap_slack = std::min(cap_slack,
                               eps_schedule(eps_schedule.size() - 1) / cand[i].g - fn);
      }
      for (int j = 0; j < nj; ++j)
        tau_slack = std::min(tau_slack, model.joints[j].torque_peak -
                                            std::abs(qp_last.x(j)));
      if (cone_slack < 1e-6) family = "friction_cone";
      else if (tau_slack < 1e-6) family = "actuation_range";
      else if (cap_slack < 1e-6) family = "complementarity";
      throw CioInfeasibleError(family, msg.str());
    }
  }

  sol.tau = qp_last.x.head(nj);
  sol.forces.resize(nc);
  VecX f_stack = qp_last.x.tail(3 * nc);
  VecX rhs_force = h0;
  rhs_force.tail(nj) += sol.tau;
  for (int i = 0; i < nc; ++i) {
    const Vec3 f_local(f_stack(3 * i), f_stack(3 * i + 1), f_stack(3 * i + 2));
    sol.forces[i] =
        f_local.x() * cand[i].normal + f_local.y() * cand[i].t_u + f_local.z() * cand[i].t_v;
    rhs_force += cand[i].j_basis * f_local;
  }
  sol.u_dot = m_llt.solve(rhs_force);
  sol.objective = 0.5 * f_stack.dot(g_del * f_stack);

  CioResiduals& r = sol.residuals;
  r.dynamics = (m * sol.u_dot - rhs_force).lpNorm<Eigen::Infinity>();
  for (int j = 0; j < nj; ++j) {
    r.joint_limits = std::max(
        r.joint_limits, std::max(state.q_joint(j) - model.joints[j].limit_max,
                                 model.joints[j].limit_min - state.q_joint(j)));
    r.torque_limits = std::max(
        r.torque_limits, std::abs(sol.tau(j)) - model.joints[j].torque_peak);
  }
  r.joint_limits = std::max(0.0, r.joint_limits);
  r.torque_limits = std::max(0.0, r.torque_limits);
  for (int i = 0; i < nc; ++i) {
    const double fn = f_stack(3 * i);
    const Vec2 ft(f_stack(3 * i + 1), f_stack(3 * i + 2));
    r.unilaterality = std::max({r.unilaterality, -fn, -cand[i].g - 1e-6});
    r.complementarity = std::max(r.complementarity, std::abs(cand[i].g * fn));
    r.cone = std::max(r.cone, ft.norm() - problem.contact.mu_s * fn);
  }
  r.unilaterality = std::max(0.0, r.unilaterality);
  r.cone = std::max(0.0, r.cone);
  for (int i : active_idx) {
    r.gap_velocity = std::max(r.gap_velocity, std::abs(cand[i].g_dot));
    r.gap_acceleration =
        std::max(r.gap_acceleration,
                 std::abs(cand[i].w_row.dot(sol.u_dot) + cand[i].zeta_hat));
  }
  r.init_velocity = r.gap_velocity;
  Vec3 total_f = Vec3::Zero();
  for (const Vec3& f : sol.forces) total_f += f;
  r.com_accel = ((total_f / total_mass + problem.gravity) -
                 problem.desired_com_accel)
                    .norm();
  return sol;
}

GeneralizedState project_initial_velocity(const RobotModel& model,
                                          const GeneralizedState& state,
                                          const Terrain& terrain, double gap_tol) {
  auto cands = contact_candidates(model, state.q(), state.orientation_ref);
  std::vector<VecX> rows;
  for (const auto& c : cands) {
    GapResult gr = gap_rates(model, state, c, terrain, 0.0);
    if (gr.g <= gap_tol) rows.push_back(gr.w_row);
  }
  if (rows.empty()) return state;
  MatX w(rows.size(), model.nu());
  for (size_t i = 0; i < rows.size(); ++i) w.row(i) = rows[i].transpose();
  // least-change projection onto W u = 0
  MatX wwt = w * w.transpose();
  wwt.diagonal().array() += 1e-12;
  GeneralizedState out = state;
  out.u = state.u - w.transpose() * wwt.ldlt().solve(w * state.u);
  const double residual = (w * out.u).lpNorm<Eigen::Infinity>();
  if (residual > 1e-8)
    throw ValidationError("initial velocity: cannot satisfy contact rows");
  return out;
}

ShootingEntry shoot_trajectory(const RobotModel& model, const SimConfig& base,
                               const GaitSpec& gait, double horizon, double dt,
                               const ShootingObjective& objective) {
  if (gait.family != GaitFamily::kNone && horizon < 1.0 / gait.frequency)
    throw ValidationError("horizon: must cover at least one gait period");
  SimConfig config = base;
  config.gait = gait;
  config.duration = horizon;
  config.dt = dt;

  ShootingEntry entry;
  entry.gait = gait;
  entry.trace = run_scenario(model, config);
  if (entry.trace.diverged) {
    entry.failed = true;
    entry.fail_time = entry.trace.divergence_time;
    entry.objective = std::numeric_limits<double>::infinity();
    return entry;
  }
  const auto& rec = entry.trace.records;
  const Vec2 goal = config.goal_direction.normalized();
  const Vec2 d(rec.back().com.x() - rec.front().com.x(),
               rec.back().com.y() - rec.front().com.y());
  entry.displacement = d.dot(goal);
  double effort = 0.0;
  for (size_t i = 0; i + 1 < rec.size(); ++i) {
    double p = 0.0;
    for (int j = 0; j < model.joint_count(); ++j)
      p += std::abs(rec[i].tau(j) * rec[i].u(6 + j));
    effort += p * dt;
  }
  entry.effort = effort;
  entry.objective = -objective.w_displacement * entry.displacement +
                    objective.w_effort * entry.effort;
  return entry;
}

int sim_thread_budget() {
  if (const char* env = std::getenv("COBRA_SIM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::min(8u, hw == 0 ? 1u : hw));
}

namespace {

GaitSpec spec_from_params(GaitFamily family, const Vec3& p, const GaitSpec& seed) {
  GaitSpec s = seed;
  s.family = family;
  s.amp_h = p(0);
  s.amp_v = p(1);
  s.frequency = p(2);
  return s;
}

bool lex_less(const Vec3& a, const Vec3& b) {
  for (int i = 0; i < 3; ++i) {
    if (a(i) < b(i) - 1e-15) return true;
    if (a(i) > b(i) + 1e-15) return false;
  }
  return false;
}

}  // namespace

OptimizeResult optimize_gait(const RobotModel& model, const SimConfig& base,
                             GaitFamily family, const GaitBounds& bounds,
                             int budget, const ShootingObjective& objective) {
  if (budget < 1) throw ValidationError("budget: must be positive");
  const Vec3 lo(bounds.amp_h(0), bounds.amp_v(0), bounds.frequency(0));
  const Vec3 hi(bounds.amp_h(1), bounds.amp_v(1), bounds.frequency(1));
  for (int i = 0; i < 3; ++i)
    if (lo(i) > hi(i)) throw ValidationError("bounds: inverted box");

  GaitSpec seed = base.gait;
  const double horizon = base.duration;
  const double dt = base.dt;

  OptimizeResult result;
  std::vector<Vec3> evaluated;
  auto evaluate_batch = [&](const std::vector<Vec3>& params) {
    std::vector<ShootingEntry> entries(params.size());
    const int pool = sim_thread_budget();
    for (size_t start = 0; start < params.size();
         start += static_cast<size_t>(pool)) {
      const size_t stop = std::min(params.size(), start + pool);
      std::vector<std::future<ShootingEntry>> futs;
      for (size_t i = start; i < stop; ++i) {
        futs.push_back(std::async(std::launch::async, [&, i]() {
          return shoot_trajectory(model, base,
                                  spec_from_params(family, params[i], seed),
                                  horizon, dt, objective);
        }));
      }
      for (size_t i = start; i < stop; ++i) entries[i] = futs[i - start].get();
    }
    for (auto& e : entries) result.audit.push_back(e);
    return entries;
  };

  const bool point_box = (hi - lo).norm() < 1e-12;
  Vec3 center = 0.5 * (lo + hi);
  Vec3 step = 0.25 * (hi - lo);

  int remaining = budget;
  Vec3 best_p = center;
  double best_obj = std::numeric_limits<double>::infinity();
  bool any_ok = false;

  auto consider = [&](const std::vector<Vec3>& params,
                      const std::vector<ShootingEntry>& entries) {
    for (size_t i = 0; i < params.size(); ++i) {
      if (entries[i].failed) continue;
      any_ok = true;
      if (entries[i].objective < best_obj - 1e-12 ||
          (std::abs(entries[i].objective - best_obj) <= 1e-12 &&
           lex_less(params[i], best_p))) {
        best_obj = entries[i].objective;
        best_p = params[i];
      }
    }
  };

  {
    std::vector<Vec3> first{center};
    auto entries = evaluate_batch(first);
    consider(first, entries);
    remaining -= 1;
  }

  while (remaining > 0 && !point_box) {
    std::vector<Vec3> probes;
    for (int d = 0; d < 3 && static_cast<int>(probes.size()) < remaining; ++d) {
      for (double sgn : {+1.0, -1.0}) {
        Vec3 p = best_p;
        p(d) = std::clamp(p(d) + sgn * step(d), lo(d), hi(d));
        if ((p - best_p).norm() > 1e-12 &&
            static_cast<int>(probes.size()) < remaining)
          probes.push_back(p);
      }
    }
    if (probes.empty()) break;
    const double before = best_obj;
    auto entries = evaluate_batch(probes);
    consider(probes, entries);
    remaining -= static_cast<int>(probes.size());
    if (best_obj >= before - 1e-12) step *= 0.5;
    if (step.norm() < 1e-9) break;
  }

  if (!any_ok)
    throw CioConvergenceError("optimize_gait: every rollout failed");
  result.best = spec_from_params(family, best_p, seed);
  result.best_objective = best_obj;
  return result;
}

}  // namespace cobra
