#pragma once

#include <string>
#include <vector>

#include "cobra/contact.hpp"
#include "cobra/dynamics.hpp"
#include "cobra/gait.hpp"
#include "cobra/qp.hpp"
#include "cobra/sim.hpp"
#include "cobra/types.hpp"

namespace cobra {

enum class FrictionConeMode { kPolyhedral, kSoc };

// One time-step contact-implicit problem: resolve torques, contact forces and
// accelerations achieving a desired CoM acceleration under the least-
// constraint objective 1/2 f' G f.
struct CioProblem {
  const RobotModel* model = nullptr;
  Terrain terrain = FlatPlane{};
  GeneralizedState state;
  Vec3 desired_com_accel = Vec3::Zero();
  std::vector<ContactCandidate> candidates;  // considered contact points
  ContactParams contact;
  Vec3 gravity = kStandardGravity;
  VecX eps_schedule;  // strictly decreasing complementarity relaxation
  FrictionConeMode cone_mode = FrictionConeMode::kPolyhedral;
  int facets = 8;
  double active_gap_tol = 1e-4;   // m, gap threshold for acceleration rows
  double active_vel_tol = 1e-3;   // m/s, separating contacts are excluded

  static VecX default_eps_schedule();
  void validate() const;
};

struct CioResiduals {
  double dynamics = 0.0;          // (1)
  double joint_limits = 0.0;      // (2)
  double torque_limits = 0.0;     // (3)
  double complementarity = 0.0;   // (4) max |g f_N|
  double unilaterality = 0.0;     // (4) max(0, -f_N) and max(0, -g)
  double cone = 0.0;              // (5) max ||f_T|| - mu f_N
  double gap_velocity = 0.0;      // (6) max |g_dot| over active
  double gap_acceleration = 0.0;  // (7) max |g_ddot| over active
  double init_velocity = 0.0;     // (8)
  double com_accel = 0.0;         // desired CoM acceleration mismatch
};

struct CioSolution {
  VecX tau;
  std::vector<Vec3> forces;  // world frame, one per candidate
  VecX u_dot;
  double objective = 0.0;    // 1/2 f' G f
  CioResiduals residuals;
  VecX complementarity_history;  // per epsilon-schedule iteration
};

class CioInfeasibleError : public std::runtime_error {
 public:
  CioInfeasibleError(const std::string& family, const std::string& msg)
      : std::runtime_error(msg), binding_family_(family) {}
  const std::string& binding_family() const { return binding_family_; }

 private:
  std::string binding_family_;
};

class CioConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

CioSolution solve_cio_step(const CioProblem& problem);

// Projects the velocity onto the null space of the active-contact normal
// rows (constraint (8)); throws when no compatible projection exists.
GeneralizedState project_initial_velocity(const RobotModel& model,
                                          const GeneralizedState& state,
                                          const Terrain& terrain,
                                          double gap_tol = 1e-4);

struct ShootingObjective {
  double w_displacement = 1.0;
  double w_effort = 0.01;
};

struct ShootingEntry {
  GaitSpec gait;
  double objective = 0.0;     // w1 * (-displacement) + w2 * effort
  double displacement = 0.0;  // m along the goal direction
  double effort = 0.0;        // J, integral of sum |tau u|
  bool failed = false;
  double fail_time = 0.0;
  SimTrace trace;
};

// Rolls out the closed-loop simulator under the gait and scores it.
ShootingEntry shoot_trajectory(const RobotModel& model, const SimConfig& base,
                               const GaitSpec& gait, double horizon, double dt,
                               const ShootingObjective& objective = {});

struct GaitBounds {
  Vec2 amp_h = Vec2(0.3, 1.1);      // rad
  Vec2 amp_v = Vec2(0.15, 0.7);     // rad
  Vec2 frequency = Vec2(0.2, 0.6);  // Hz
};

struct OptimizeResult {
  GaitSpec best;
  double best_objective = 0.0;
  std::vector<ShootingEntry> audit;  // every evaluation, in order
};

// Derivative-free pattern search over (amp_h, amp_v, frequency) within the
// box; rollouts may run in parallel (COBRA_SIM_THREADS caps the pool) and the
// winner is order-independent with lexicographic tie-breaking.
OptimizeResult optimize_gait(const RobotModel& model, const SimConfig& base,
                             GaitFamily family, const GaitBounds& bounds,
                             int budget, const ShootingObjective& objective = {});

int sim_thread_budget();

}  // namespace cobra
