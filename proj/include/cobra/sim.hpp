#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cobra/contact.hpp"
#include "cobra/dynamics.hpp"
#include "cobra/gait.hpp"
#include "cobra/robot_model.hpp"
#include "cobra/types.hpp"

namespace cobra {

struct PidGains {
  double kp = 80.0;   // N m / rad
  double kd = 30.0;   // N m s / rad
  double ki = 10.0;   // N m / (rad s)
  double update_rate = 1000.0;  // Hz
  // First-order filter time constant on the error rate. Servo firmware never
  // differentiates raw encoder velocity; without this the derivative term is
  // discretely unstable on the nearly free end joints at 1 kHz.
  double d_filter = 0.02;  // s
};

// Emulates the embedded low-level joint controller. The integral term is
// frozen while the output saturates at the peak torque.
class PidController {
 public:
  PidController(const RobotModel& model, const PidGains& gains = {});

  void reset();
  // dt_control must equal 1/update_rate. Flags joints whose output exceeds
  // the continuous torque rating.
  VecX compute(const VecX& target, const VecX& target_rate, const VecX& q_joint,
               const VecX& u_joint, double dt_control,
               std::vector<bool>* continuous_exceeded = nullptr);
  const PidGains& gains() const { return gains_; }

 private:
  const RobotModel* model_;
  PidGains gains_;
  VecX integral_;
  VecX rate_filtered_;
  bool rate_primed_ = false;
};

struct SimConfig {
  double dt = 1e-3;    // s
  double duration = 10.0;  // s
  Terrain terrain = FlatPlane{};
  ContactParams contact;
  Vec3 gravity = kStandardGravity;
  GaitSpec gait;
  GeneralizedState initial;
  PidGains pid;
  bool latch_engaged = false;  // start with the head-tail weld closed
  bool track_ring = false;     // ring-axis / revolution / tip-over monitors
  double tipover_angle = deg2rad(60.0);
  uint64_t seed = 0;  // reserved for randomized perturbations (none by default)
  std::string scenario_id;
  Vec2 goal_direction = Vec2(0, 1);

  void validate() const;
};

struct ContactSample {
  double g = 1e9;
  double f_n = 0.0;
  double f_t = 0.0;
  double x = 0.0, y = 0.0;
  bool active = false;
};

struct TraceRecord {
  double t = 0.0;
  VecX q;   // 17, Euler chart composed with ref below
  VecX u;   // 17
  Quat orientation_ref;
  VecX targets;  // 11
  VecX tau;      // 11
  std::vector<ContactSample> contacts;  // 3 per link, candidate order
  Vec3 com = Vec3::Zero();
  Vec3 com_velocity = Vec3::Zero();
  double e_kin = 0.0, e_pot = 0.0;
  double p_actuation = 0.0, p_contact = 0.0;
  bool latch_engaged = false;
  double latch_pos_err = 0.0, latch_ang_err = 0.0;
  double ring_angle = 0.0;     // unwrapped rotation about the ring axis
  double ring_tilt = 0.0;      // angle between ring axis and its release axis
  bool flag_continuous_torque = false;
  bool flag_energy_anomaly = false;
  bool flag_tipover = false;
};

struct SimTrace {
  std::vector<TraceRecord> records;  // one per dt, t = 0 .. duration - dt
  GeneralizedState initial_state;
  GeneralizedState final_state;
  double dt = 1e-3;
  double total_mass = 0.0;
  std::string scenario_id;
  Vec2 goal_direction = Vec2(0, 1);
  Vec3 gravity = kStandardGravity;
  bool ring_tracked = false;
  bool diverged = false;
  double divergence_time = 0.0;
  std::string divergence_reason;

  SimTrace decimated(int factor) const;
};

// One fixed-step third-order Runge-Kutta step of the closed-loop system;
// torques and the latch state are held constant across the stages.
struct StepInput {
  VecX tau;
  bool latch_engaged = false;
};

GeneralizedState rk3_step(const RobotModel& model, const SimConfig& config,
                          const GeneralizedState& state, const StepInput& input,
                          double t);

// Scalar-test hook used by the integrator order oracle.
double rk3_scalar_step(double x, double dt, double (*f)(double t, double x), double t);

SimTrace run_scenario(const RobotModel& model, const SimConfig& config);

}  // namespace cobra
