#pragma once

#include <optional>
#include <vector>

#include "cobra/sim.hpp"
#include "cobra/types.hpp"

namespace cobra {

// Declared contact patch: a 0.05 x 0.00706 m strip of the capsule surface.
inline constexpr double kDefaultPatchArea = 0.05 * 0.00706;  // m^2
// Lowest bearing-capacity figure among the regolith simulants (CSM-LHT-1).
inline constexpr double kDefaultBearingLimitPa = 620e3;

struct Metrics {
  double avg_speed = 0.0;        // m/s along the goal direction
  double duty_factor = 0.0;      // per-module mean
  double duty_factor_whole_body = 0.0;
  double peak_normal = 0.0;      // N, max over time of per-link normal sums
  double avg_power = 0.0;        // W, mean of sum_j |tau_j u_j|
  double cost_of_transport = std::numeric_limits<double>::quiet_NaN();
  double per_cycle_advance = std::numeric_limits<double>::quiet_NaN();
  double per_cycle_descent = std::numeric_limits<double>::quiet_NaN();
  double max_contact_pressure = 0.0;  // Pa
  double distance = 0.0;         // m along goal over the measured window
  double duration = 0.0;         // s of the measured window
  double torque_peak = 0.0;      // N m, max over joints and time
  double torque_continuous = 0.0;  // N m, median of per-record max |tau|
  double revolutions = 0.0;      // ring revolutions over the window
  bool tipover = false;
  int cycles_used = 0;
};

// Locomotion metrics over an integer number of steady-state cycles (the first
// cycle is discarded as transient). Pass gait_period <= 0 for tumbling
// traces; cycles then come from full ring revolutions. Contact quantities
// follow the 100 Hz observation cadence.
Metrics compute_metrics(const SimTrace& trace, double gait_period,
                        double patch_area = kDefaultPatchArea);

struct FootprintPoint {
  Vec2 xy;
  int link = 0;
  double t = 0.0;
};

// Contact touchdown locations at contact-onset events, ordered by time.
std::vector<FootprintPoint> footprint(const SimTrace& trace);

// Displacement along the goal direction per cycle, aligned at cycle
// boundaries; gait_period <= 0 segments by ring revolution.
std::vector<double> per_cycle_normalize(const SimTrace& trace, double gait_period);

struct BearingCheck {
  bool pass = true;
  double margin = 0.0;     // Pa below the limit
  double pressure = 0.0;   // Pa
  double limit = 0.0;      // Pa
};

BearingCheck bearing_check(const Metrics& metrics, double limit_pa);

}  // namespace cobra
