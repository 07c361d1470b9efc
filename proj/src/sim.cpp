#include "cobra/sim.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <cmath>

namespace cobra {

namespace {

constexpr double kBaumgarteOmega = 60.0;  // rad/s, well below 1/dt
constexpr double kBaumgarteZeta = 1.0;
constexpr double kRechartPitch = 0.9;     // rad

struct DynamicsEval {
  VecX u_dot;
  ContactSet contacts;
  double latch_pos_err = 0.0;
  double latch_ang_err = 0.0;
};

// Closed-loop plant derivative: penalty contacts plus, when the latch is
// engaged, a 6-row weld between the head and tail latch frames solved
// simultaneously with Baumgarte stabilization.
DynamicsEval eval_dynamics(const RobotModel& model, const SimConfig& config,
                           const GeneralizedState& state, const StepInput& input) {
  ChainKinematics kin(model, state);
  DynamicsEval out;
  out.contacts = resolve_penalty_contacts(kin, config.terrain, config.contact);

  VecX rhs = bias_vector(kin, input.tau, config.gravity);
  for (const auto& c : out.contacts.contacts) {
    const MatX j = kin.point_jacobian(c.link, c.world_point);
    rhs.noalias() += j.transpose() * c.world_force;
  }

  const MatX m = mass_matrix(kin);
  Eigen::LLT<MatX> llt(m);
  if (llt.info() != Eigen::Success)
    throw SingularityError("mass matrix: not positive definite");

  if (!input.latch_engaged) {
    out.u_dot = llt.solve(rhs);
    return out;
  }

  const int tail = model.link_count() - 1;
  const Pose head_latch = model.head_latch_frame(kin.poses());
  const Pose tail_latch = model.tail_latch_frame(kin.poses());
  const Vec3 ref_pt = head_latch.position;

  MatX a(6, model.nu());
  a.topRows(3) = kin.point_jacobian(tail, ref_pt) - kin.point_jacobian(0, ref_pt);
  a.bottomRows(3) = kin.link_angular_jacobian(tail) - kin.link_angular_jacobian(0);

  Vec6 a_dot_u;
  a_dot_u.head<3>() =
      kin.point_acceleration_vp(tail, ref_pt) - kin.point_acceleration_vp(0, ref_pt);
  a_dot_u.tail<3>() = kin.alpha_vp(tail) - kin.alpha_vp(0);

  Vec6 err;
  err.head<3>() = tail_latch.position - head_latch.position;
  Eigen::AngleAxisd aa(tail_latch.rotation * head_latch.rotation.transpose());
  err.tail<3>() = aa.angle() * aa.axis();
  out.latch_pos_err = err.head<3>().norm();
  out.latch_ang_err = std::abs(aa.angle());

  const Vec6 c_dot = a * state.u;
  const Vec6 b_c = -a_dot_u - 2.0 * kBaumgarteZeta * kBaumgarteOmega * c_dot -
                   kBaumgarteOmega * kBaumgarteOmega * err;

  const MatX m_inv_at = llt.solve(a.transpose());
  MatX s = a * m_inv_at;
  s.diagonal().array() += 1e-12;
  const VecX lambda = s.ldlt().solve(b_c - a * llt.solve(rhs));
  out.u_dot = llt.solve(rhs + a.transpose() * lambda);
  return out;
}

VecX pack(const GeneralizedState& s) {
  VecX x(s.u.size() * 2);
  x.head(s.u.size()) = s.q();
  x.tail(s.u.size()) = s.u;
  return x;
}

GeneralizedState unpack(const GeneralizedState& like, const VecX& x) {
  GeneralizedState s = like;
  const int n = static_cast<int>(x.size()) / 2;
  s.set_q(x.head(n));
  s.u = x.tail(n);
  return s;
}

// Kills residual weld drift after each step: least-inertia correction of the
// relative latch pose and twist.
void project_latch_constraint(const RobotModel& model, GeneralizedState& state) {
  for (int pass = 0; pass < 2; ++pass) {
    ChainKinematics kin(model, state);
    const int tail = model.link_count() - 1;
    const Pose head_latch = model.head_latch_frame(kin.poses());
    const Pose tail_latch = model.tail_latch_frame(kin.poses());
    const Vec3 ref_pt = head_latch.position;

    MatX a(6, model.nu());
    a.topRows(3) =
        kin.point_jacobian(tail, ref_pt) - kin.point_jacobian(0, ref_pt);
    a.bottomRows(3) =
        kin.link_angular_jacobian(tail) - kin.link_angular_jacobian(0);

    Vec6 err;
    err.head<3>() = tail_latch.position - head_latch.position;
    Eigen::AngleAxisd aa(tail_latch.rotation * head_latch.rotation.transpose());
    err.tail<3>() = aa.angle() * aa.axis();

    const MatX m = mass_matrix(kin);
    Eigen::LLT<MatX> llt(m);
    const MatX m_inv_at = llt.solve(a.transpose());
    MatX s = a * m_inv_at;
    s.diagonal().array() += 1e-12;
    Eigen::LDLT<MatX> s_ldlt(s);

    const VecX dq = -m_inv_at * s_ldlt.solve(err);
    state.set_q(state.q() + dq);
    state.u -= m_inv_at * s_ldlt.solve(a * state.u);
    if (err.norm() < 1e-12) break;
  }
}

Vec3 ring_axis(const std::vector<Pose>& poses) {
  const int n = static_cast<int>(poses.size());
  Vec3 mean = Vec3::Zero();
  for (const auto& p : poses) mean += p.position;
  mean /= n;
  MatX centered(n, 3);
  for (int k = 0; k < n; ++k)
    centered.row(k) = (poses[k].position - mean).transpose();
  Eigen::JacobiSVD<MatX> svd(centered, Eigen::ComputeFullV);
  return svd.matrixV().col(2);
}

}  // namespace

PidController::PidController(const RobotModel& model, const PidGains& gains)
    : model_(&model),
      gains_(gains),
      integral_(VecX::Zero(model.joint_count())),
      rate_filtered_(VecX::Zero(model.joint_count())) {}

void PidController::reset() {
  integral_.setZero();
  rate_filtered_.setZero();
  rate_primed_ = false;
}

VecX PidController::compute(const VecX& target, const VecX& target_rate,
                            const VecX& q_joint, const VecX& u_joint,
                            double dt_control,
                            std::vector<bool>* continuous_exceeded) {
  const int nj = model_->joint_count();
  VecX tau(nj);
  if (continuous_exceeded) continuous_exceeded->assign(nj, false);
  const double beta =
      gains_.d_filter > 0 ? gains_.d_filter / (gains_.d_filter + dt_control) : 0.0;
  for (int j = 0; j < nj; ++j) {
    const double e = target(j) - q_joint(j);
    const double e_dot_raw = target_rate(j) - u_joint(j);
    const double e_dot =
        rate_primed_ ? beta * rate_filtered_(j) + (1.0 - beta) * e_dot_raw
                     : e_dot_raw;
    rate_filtered_(j) = e_dot;
    const double i_trial = integral_(j) + e * dt_control;
    const double raw = gains_.kp * e + gains_.ki * i_trial + gains_.kd * e_dot;
    const double peak = model_->joints[j].torque_peak;
    tau(j) = std::clamp(raw, -peak, peak);
    if (std::abs(raw) <= peak) integral_(j) = i_trial;  // anti-windup
    if (continuous_exceeded && std::abs(tau(j)) > model_->joints[j].torque_continuous)
      (*continuous_exceeded)[j] = true;
  }
  rate_primed_ = true;
  return tau;
}

void SimConfig::validate() const {
  if (!(dt > 0)) throw ValidationError("sim.dt: must be positive");
  if (duration < dt) throw ValidationError("sim.duration: must cover at least one step");
  contact.validate();
  if (gait.family != GaitFamily::kNone) gait.validate();
  if (const auto* inc = std::get_if<InclinedPlane>(&terrain)) {
    if (inc->angle < 0 || inc->angle > kPi / 3.0)
      throw ValidationError("terrain.angle: must be in [0, 60] deg");
  }
}

GeneralizedState rk3_step(const RobotModel& model, const SimConfig& config,
                          const GeneralizedState& state, const StepInput& input,
                          double t) {
  (void)t;  // the plant has no explicit time dependence within a step
  const double dt = config.dt;
  const VecX x0 = pack(state);

  auto f = [&](const VecX& x) {
    const GeneralizedState s = unpack(state, x);
    const DynamicsEval ev = eval_dynamics(model, config, s, input);
    VecX xd(x.size());
    xd.head(s.u.size()) = s.u;
    xd.tail(s.u.size()) = ev.u_dot;
    return xd;
  };

  // Bogacki-Shampine three-stage tableau (third order)
  const VecX k1 = f(x0);
  const VecX k2 = f(x0 + 0.5 * dt * k1);
  const VecX k3 = f(x0 + 0.75 * dt * k2);
  const VecX x1 = x0 + dt * (2.0 * k1 + 3.0 * k2 + 4.0 * k3) / 9.0;
  return unpack(state, x1);
}

double rk3_scalar_step(double x, double dt, double (*f)(double t, double x),
                       double t) {
  const double k1 = f(t, x);
  const double k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1);
  const double k3 = f(t + 0.75 * dt, x + 0.75 * dt * k2);
  return x + dt * (2.0 * k1 + 3.0 * k2 + 4.0 * k3) / 9.0;
}

SimTrace SimTrace::decimated(int factor) const {
  SimTrace out = *this;
  if (factor <= 1) return out;
  out.records.clear();
  for (size_t i = 0; i < records.size(); i += factor) out.records.push_back(records[i]);
  out.dt = dt * factor;
  return out;
}

SimTrace run_scenario(const RobotModel& model, const SimConfig& config) {
  config.validate();
  const int steps = static_cast<int>(std::lround(config.duration / config.dt));
  const double dt = config.dt;

  SimTrace trace;
  trace.records.reserve(steps);
  trace.initial_state = config.initial;
  trace.dt = dt;
  trace.total_mass = model.total_mass();
  trace.scenario_id = config.scenario_id;
  trace.goal_direction = config.goal_direction;
  trace.gravity = config.gravity;
  trace.ring_tracked = config.track_ring;

  GeneralizedState state = config.initial;
  if (state.q_joint.size() == 0) state = GeneralizedState::zero(model);
  PidController pid(model, config.pid);
  bool latch = config.latch_engaged;

  VecX prev_targets;
  double ring_angle = 0.0;
  Vec3 axis_ref = Vec3::UnitX(), axis_prev = Vec3::UnitX();
  Vec3 marker_prev = Vec3::UnitZ();
  bool tipover_latched = false;

  if (config.track_ring) {
    ChainKinematics kin(model, state);
    axis_ref = ring_axis(kin.poses());
    axis_prev = axis_ref;
    marker_prev = kin.poses()[0].rotation.col(0);
    marker_prev -= marker_prev.dot(axis_ref) * axis_ref;
    if (marker_prev.norm() > 1e-12) marker_prev.normalize();
  }

  try {
    for (int k = 0; k < steps; ++k) {
      const double t = k * dt;
      const TransformTargets tt = gait_targets(model, config.gait, t);
      if (prev_targets.size() == 0) prev_targets = tt.targets;
      const VecX target_rate = (tt.targets - prev_targets) / dt;

      std::vector<bool> cont_flags;
      StepInput input;
      input.tau = pid.compute(tt.targets, target_rate, state.q_joint,
                              state.u.tail(model.joint_count()), dt, &cont_flags);

      // engage the weld once commanded and the physical frames line up
      if (!latch && tt.latch == LatchCommand::kEngage) {
        ChainKinematics kin(model, state);
        const Pose h = model.head_latch_frame(kin.poses());
        const Pose tl = model.tail_latch_frame(kin.poses());
        const double pos_err = (h.position - tl.position).norm();
        const double ang_err =
            Eigen::AngleAxisd(h.rotation.transpose() * tl.rotation).angle();
        if (pos_err < 0.02 && std::abs(ang_err) < deg2rad(10.0)) latch = true;
      }
      input.latch_engaged = latch;

      const DynamicsEval ev = eval_dynamics(model, config, state, input);

      TraceRecord rec;
      rec.t = t;
      rec.q = state.q();
      rec.u = state.u;
      rec.orientation_ref = state.orientation_ref;
      rec.targets = tt.targets;
      rec.tau = input.tau;
      rec.latch_engaged = latch;
      rec.latch_pos_err = ev.latch_pos_err;
      rec.latch_ang_err = ev.latch_ang_err;
      for (bool f : cont_flags) rec.flag_continuous_torque |= f;

      ChainKinematics kin(model, state);
      rec.com = kin.com_position();
      rec.com_velocity = kin.com_velocity();
      rec.e_kin = kin.kinetic_energy();
      rec.e_pot = kin.potential_energy(config.gravity);
      rec.p_actuation = 0.0;
      for (int j = 0; j < model.joint_count(); ++j)
        rec.p_actuation += input.tau(j) * state.u(6 + j);
      rec.p_contact = 0.0;
      rec.contacts.assign(3 * model.link_count(), ContactSample{});
      for (const auto& c : ev.contacts.contacts) {
        const Vec3 v = kin.point_velocity(c.link, c.world_point);
        rec.p_contact += c.world_force.dot(v);
        ContactSample& s = rec.contacts[c.link * 3 + c.point_index];
        s.g = c.g;
        s.f_n = c.f_n;
        s.f_t = c.f_t.norm();
        s.x = c.world_point.x();
        s.y = c.world_point.y();
        s.active = c.f_n > 0.0;
      }

      if (config.track_ring) {
        Vec3 axis = ring_axis(kin.poses());
        if (axis.dot(axis_prev) < 0) axis = -axis;
        axis_prev = axis;
        rec.ring_tilt = std::acos(std::clamp(std::abs(axis.dot(axis_ref)), 0.0, 1.0));
        if (rec.ring_tilt > config.tipover_angle) tipover_latched = true;
        rec.flag_tipover = tipover_latched;

        Vec3 marker = kin.poses()[0].rotation.col(0);
        marker -= marker.dot(axis) * axis;
        if (marker.norm() > 1e-9 && marker_prev.norm() > 1e-9) {
          marker.normalize();
          const double cosd = std::clamp(marker_prev.dot(marker), -1.0, 1.0);
          const double sind = axis.dot(marker_prev.cross(marker));
          ring_angle += std::atan2(sind, cosd);
          marker_prev = marker;
        }
        rec.ring_angle = ring_angle;
      }

      trace.records.push_back(std::move(rec));

      state = rk3_step(model, config, state, input, t);
      if (!state.q().allFinite() || !state.u.allFinite())
        throw DivergenceError("state: non-finite value at t=" + std::to_string(t + dt));
      if (latch) project_latch_constraint(model, state);
      {
        ChainKinematics check(model, state);
        if (check.kinetic_energy() > 1e9)
          throw DivergenceError("state: kinetic energy blew up at t=" +
                                std::to_string(t + dt));
      }
      if (std::abs(state.head_euler.y()) > kRechartPitch) state.rechart();
      prev_targets = tt.targets;
    }
  } catch (const DivergenceError& e) {
    trace.diverged = true;
    trace.divergence_time = trace.records.empty() ? 0.0 : trace.records.back().t;
    trace.divergence_reason = e.what();
  }

  trace.final_state = state;

  // windowed energy audit: balance residual beyond tolerance plus a slack for
  // impact windows the fixed step cannot resolve
  const int win = static_cast<int>(std::lround(1.0 / dt));
  for (size_t start = 0; start + 1 < trace.records.size();
       start += static_cast<size_t>(win)) {
    const size_t stop = std::min(trace.records.size() - 1, start + win);
    double w_act = 0.0, w_con = 0.0, throughput = 0.0;
    for (size_t i = start; i < stop; ++i) {
      const auto& a = trace.records[i];
      const auto& b = trace.records[i + 1];
      w_act += 0.5 * (a.p_actuation + b.p_actuation) * dt;
      w_con += 0.5 * (a.p_contact + b.p_contact) * dt;
      throughput += 0.5 * (std::abs(a.p_actuation) + std::abs(a.p_contact) +
                           std::abs(b.p_actuation) + std::abs(b.p_contact)) * dt;
    }
    const auto& a = trace.records[start];
    const auto& b = trace.records[stop];
    const double de = (b.e_kin + b.e_pot) - (a.e_kin + a.e_pot);
    const double residual = std::abs(de - w_act - w_con);
    const double window_s = (stop - start) * dt;
    if (residual > 1e-2 * window_s + 0.10 * throughput) {
      for (size_t i = start; i <= stop; ++i)
        trace.records[i].flag_energy_anomaly = true;
    }
  }
  return trace;
}

}  // namespace cobra
