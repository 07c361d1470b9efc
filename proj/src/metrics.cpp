#include "cobra/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cobra {

namespace {

bool link_in_contact(const TraceRecord& rec, int link) {
  for (int p = 0; p < 3; ++p)
    if (rec.contacts[link * 3 + p].f_n > 0.0) return true;
  return false;
}

double link_normal_sum(const TraceRecord& rec, int link) {
  double f = 0.0;
  for (int p = 0; p < 3; ++p) f += rec.contacts[link * 3 + p].f_n;
  return f;
}

// indices into trace.records framing each usable cycle, first cycle dropped
std::vector<std::pair<size_t, size_t>> cycle_windows(const SimTrace& trace,
                                                     double gait_period) {
  std::vector<std::pair<size_t, size_t>> wins;
  const auto& rec = trace.records;
  if (rec.empty()) return wins;
  if (gait_period > 0) {
    const double t0 = rec.front().t;
    size_t begin = 0;
    int cycle = 0;
    for (size_t i = 0; i < rec.size(); ++i) {
      if (rec[i].t - t0 >= (cycle + 1) * gait_period - 1e-9) {
        if (cycle >= 1) wins.emplace_back(begin, i);
        begin = i;
        ++cycle;
      }
    }
    // a cycle ending within one sample of the trace end still counts
    if (cycle >= 1 &&
        rec.back().t - t0 >= (cycle + 1) * gait_period - trace.dt - 1e-9)
      wins.emplace_back(begin, rec.size() - 1);
  } else if (trace.ring_tracked) {
    size_t begin = 0;
    int cycle = 0;
    const double base = rec.front().ring_angle;
    for (size_t i = 0; i < rec.size(); ++i) {
      if (std::abs(rec[i].ring_angle - base) >= (cycle + 1) * 2.0 * kPi) {
        if (cycle >= 1) wins.emplace_back(begin, i);
        begin = i;
        ++cycle;
      }
    }
  }
  return wins;
}

}  // namespace

Metrics compute_metrics(const SimTrace& full_trace, double gait_period,
                        double patch_area) {
  if (full_trace.records.empty())
    throw ValidationError("trace: empty, nothing to measure");
  if (!(patch_area > 0)) throw ValidationError("patch_area: must be positive");

  // contact observation protocol is 100 Hz regardless of the solver step
  const int decim = std::max(1, static_cast<int>(std::lround(0.01 / full_trace.dt)));
  const SimTrace trace = full_trace.decimated(decim);
  const auto& rec = trace.records;
  const int n_links = static_cast<int>(rec.front().contacts.size()) / 3;
  const int n_joints = static_cast<int>(rec.front().tau.size());

  Metrics m;
  const Vec2 goal = trace.goal_direction.norm() > 1e-12
                        ? trace.goal_direction.normalized()
                        : Vec2(0, 1);

  const auto wins = cycle_windows(trace, gait_period);
  size_t lo = 0, hi = rec.size() - 1;
  if (!wins.empty()) {
    lo = wins.front().first;
    hi = wins.back().second;
    m.cycles_used = static_cast<int>(wins.size());
  }
  if (hi <= lo) { lo = 0; hi = rec.size() - 1; }

  const Vec2 d_xy(rec[hi].com.x() - rec[lo].com.x(),
                  rec[hi].com.y() - rec[lo].com.y());
  m.distance = d_xy.dot(goal);
  m.duration = rec[hi].t - rec[lo].t;
  m.avg_speed = m.duration > 0 ? std::abs(m.distance) / m.duration : 0.0;

  // duty factors and contact peaks over the measured window
  std::vector<double> contact_steps(n_links, 0.0);
  double any_contact_steps = 0.0;
  double peak = 0.0;
  double power_sum = 0.0;
  std::vector<double> tau_max_per_record;
  tau_max_per_record.reserve(hi - lo + 1);
  for (size_t i = lo; i <= hi; ++i) {
    bool any = false;
    for (int l = 0; l < n_links; ++l) {
      if (link_in_contact(rec[i], l)) {
        contact_steps[l] += 1.0;
        any = true;
      }
      peak = std::max(peak, link_normal_sum(rec[i], l));
    }
    if (any) any_contact_steps += 1.0;
    double p = 0.0, tmax = 0.0;
    for (int j = 0; j < n_joints; ++j) {
      p += std::abs(rec[i].tau(j) * rec[i].u(6 + j));
      tmax = std::max(tmax, std::abs(rec[i].tau(j)));
    }
    power_sum += p;
    m.torque_peak = std::max(m.torque_peak, tmax);
    tau_max_per_record.push_back(tmax);
  }
  const double n_steps = static_cast<double>(hi - lo + 1);
  double duty = 0.0;
  for (int l = 0; l < n_links; ++l) duty += contact_steps[l] / n_steps;
  m.duty_factor = duty / n_links;
  m.duty_factor_whole_body = any_contact_steps / n_steps;
  m.peak_normal = peak;
  m.avg_power = power_sum / n_steps;
  m.max_contact_pressure = peak / patch_area;
  if (m.avg_speed > 0)
    m.cost_of_transport = m.avg_power / (trace.total_mass * m.avg_speed);
  if (!tau_max_per_record.empty()) {
    std::nth_element(tau_max_per_record.begin(),
                     tau_max_per_record.begin() + tau_max_per_record.size() / 2,
                     tau_max_per_record.end());
    m.torque_continuous = tau_max_per_record[tau_max_per_record.size() / 2];
  }

  if (!wins.empty()) {
    // windows can fall one sample short of the exact period; rate-normalize
    double adv = 0.0, desc = 0.0;
    for (const auto& [a, b] : wins) {
      const double span = rec[b].t - rec[a].t;
      const double scale =
          (gait_period > 0 && span > 0) ? gait_period / span : 1.0;
      const Vec2 d(rec[b].com.x() - rec[a].com.x(), rec[b].com.y() - rec[a].com.y());
      adv += std::abs(d.dot(goal)) * scale;
      desc += (rec[a].com.z() - rec[b].com.z()) * scale;
    }
    m.per_cycle_advance = adv / wins.size();
    m.per_cycle_descent = desc / wins.size();
  }
  if (trace.ring_tracked && !rec.empty()) {
    m.revolutions =
        std::abs(rec[hi].ring_angle - rec[lo].ring_angle) / (2.0 * kPi);
    for (size_t i = lo; i <= hi; ++i) m.tipover |= rec[i].flag_tipover;
  }
  return m;
}

std::vector<FootprintPoint> footprint(const SimTrace& trace) {
  std::vector<FootprintPoint> out;
  if (trace.records.empty()) return out;
  const int n_links = static_cast<int>(trace.records.front().contacts.size()) / 3;
  std::vector<bool> was(n_links, false);
  for (const auto& rec : trace.records) {
    for (int l = 0; l < n_links; ++l) {
      const bool now = link_in_contact(rec, l);
      if (now && !was[l]) {
        // deepest candidate marks the touchdown location
        int best = -1;
        double best_g = std::numeric_limits<double>::max();
        for (int p = 0; p < 3; ++p) {
          const auto& c = rec.contacts[l * 3 + p];
          if (c.f_n > 0.0 && c.g < best_g) {
            best_g = c.g;
            best = p;
          }
        }
        if (best >= 0)
          out.push_back({Vec2(rec.contacts[l * 3 + best].x,
                              rec.contacts[l * 3 + best].y),
                         l, rec.t});
      }
      was[l] = now;
    }
  }
  return out;
}

std::vector<double> per_cycle_normalize(const SimTrace& trace, double gait_period) {
  const auto wins = cycle_windows(trace, gait_period);
  if (wins.empty())
    throw ValidationError("trace: needs at least two cycles for normalization");
  const Vec2 goal = trace.goal_direction.norm() > 1e-12
                        ? trace.goal_direction.normalized()
                        : Vec2(0, 1);
  std::vector<double> out;
  for (const auto& [a, b] : wins) {
    const double span = trace.records[b].t - trace.records[a].t;
    const double scale = (gait_period > 0 && span > 0) ? gait_period / span : 1.0;
    const Vec2 d(trace.records[b].com.x() - trace.records[a].com.x(),
                 trace.records[b].com.y() - trace.records[a].com.y());
    out.push_back(d.dot(goal) * scale);
  }
  return out;
}

BearingCheck bearing_check(const Metrics& metrics, double limit_pa) {
  BearingCheck c;
  c.limit = limit_pa;
  c.pressure = metrics.max_contact_pressure;
  if (c.pressure <= 0.0) {
    c.pass = true;
    c.margin = std::numeric_limits<double>::max();
    return c;
  }
  c.pass = c.pressure <= limit_pa;
  c.margin = limit_pa - c.pressure;
  return c;
}

}  // namespace cobra
