#include "cobra/trace_io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "json.hpp"

namespace cobra {

namespace {

void append_num(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  out += buf;
}

}  // namespace

void atomic_write_text(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + tmp.string());
    if (std::fwrite(contents.data(), 1, contents.size(), f) != contents.size()) {
      std::fclose(f);
      throw IoError("short write: " + tmp.string());
    }
    std::fclose(f);
  }
  fs::rename(tmp, target);
}

void write_trace_csv(const SimTrace& full, const std::string& path, int trace_hz) {
  const double rate = 1.0 / full.dt;
  const int factor = std::max(1, static_cast<int>(std::lround(rate / trace_hz)));
  const SimTrace trace = full.decimated(factor);

  std::string out;
  out.reserve(trace.records.size() * 1200 + 4096);
  out += "t";
  const int nq = trace.records.empty() ? 17 : static_cast<int>(trace.records[0].q.size());
  const int nj = trace.records.empty() ? 11 : static_cast<int>(trace.records[0].tau.size());
  const int ncand = trace.records.empty() ? 36
                                          : static_cast<int>(trace.records[0].contacts.size());
  for (int i = 0; i < nq; ++i) out += ",q" + std::to_string(i);
  for (int i = 0; i < nq; ++i) out += ",u" + std::to_string(i);
  for (int i = 0; i < nj; ++i) out += ",tau" + std::to_string(i);
  for (int c = 0; c < ncand; ++c) {
    const std::string id = "L" + std::to_string(c / 3) + "P" + std::to_string(c % 3);
    out += ",g_" + id + ",fN_" + id + ",fT_" + id;
  }
  out += ",com_x,com_y,com_z,latch,flags\n";

  for (const auto& r : trace.records) {
    append_num(out, r.t);
    for (int i = 0; i < nq; ++i) { out += ','; append_num(out, r.q(i)); }
    for (int i = 0; i < nq; ++i) { out += ','; append_num(out, r.u(i)); }
    for (int i = 0; i < nj; ++i) { out += ','; append_num(out, r.tau(i)); }
    for (const auto& c : r.contacts) {
      out += ','; append_num(out, c.g);
      out += ','; append_num(out, c.f_n);
      out += ','; append_num(out, c.f_t);
    }
    out += ','; append_num(out, r.com.x());
    out += ','; append_num(out, r.com.y());
    out += ','; append_num(out, r.com.z());
    out += r.latch_engaged ? ",1" : ",0";
    int flags = 0;
    if (r.flag_continuous_torque) flags |= 1;
    if (r.flag_energy_anomaly) flags |= 2;
    if (r.flag_tipover) flags |= 4;
    out += ',' + std::to_string(flags);
    out += '\n';
  }
  atomic_write_text(path, out);
}

void write_metrics_json(const Metrics& m, const BearingCheck& bearing,
                        const std::string& scenario_id, const std::string& gait,
                        const std::string& terrain, const std::string& path) {
  nlohmann::json j;
  j["scenario_id"] = scenario_id;
  j["gait"] = gait;
  j["terrain"] = terrain;
  j["avg_speed_mps"] = m.avg_speed;
  j["duty_factor"] = m.duty_factor;
  j["duty_factor_whole_body"] = m.duty_factor_whole_body;
  j["peak_normal_N"] = m.peak_normal;
  j["avg_power_W"] = m.avg_power;
  j["cot_J_per_kg_m"] =
      std::isfinite(m.cost_of_transport) ? nlohmann::json(m.cost_of_transport)
                                         : nlohmann::json(nullptr);
  j["per_cycle_advance_m"] =
      std::isfinite(m.per_cycle_advance) ? nlohmann::json(m.per_cycle_advance)
                                         : nlohmann::json(nullptr);
  j["per_cycle_descent_m"] =
      std::isfinite(m.per_cycle_descent) ? nlohmann::json(m.per_cycle_descent)
                                         : nlohmann::json(nullptr);
  j["distance_m"] = m.distance;
  j["duration_s"] = m.duration;
  j["torque_peak_Nm"] = m.torque_peak;
  j["torque_continuous_Nm"] = m.torque_continuous;
  j["revolutions"] = m.revolutions;
  j["tipover"] = m.tipover;
  j["cycles_used"] = m.cycles_used;
  j["bearing"] = {
      {"pressure_Pa", bearing.pressure},
      {"limit_Pa", bearing.limit},
      {"pass", bearing.pass},
  };
  atomic_write_text(path, j.dump(2) + "\n");
}

void write_plot_data(const SimTrace& full, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const int factor =
      std::max(1, static_cast<int>(std::lround((1.0 / full.dt) / 100.0)));
  const SimTrace trace = full.decimated(factor);

  std::string traj = "t,head_x,head_y,head_z,com_x,com_y,com_z\n";
  for (const auto& r : trace.records) {
    append_num(traj, r.t);
    for (double v : {r.q(0), r.q(1), r.q(2), r.com.x(), r.com.y(), r.com.z()}) {
      traj += ',';
      append_num(traj, v);
    }
    traj += '\n';
  }
  atomic_write_text(dir + "/com_trajectory.csv", traj);

  const int n_links = trace.records.empty()
                          ? 12
                          : static_cast<int>(trace.records[0].contacts.size()) / 3;
  std::string forces = "t";
  for (int l = 0; l < n_links; ++l) forces += ",fN_link" + std::to_string(l);
  forces += "\n";
  for (const auto& r : trace.records) {
    append_num(forces, r.t);
    for (int l = 0; l < n_links; ++l) {
      double f = 0.0;
      for (int p = 0; p < 3; ++p) f += r.contacts[l * 3 + p].f_n;
      forces += ',';
      append_num(forces, f);
    }
    forces += '\n';
  }
  atomic_write_text(dir + "/normal_forces.csv", forces);

  const int nj = trace.records.empty() ? 11 : static_cast<int>(trace.records[0].tau.size());
  std::string torques = "t";
  for (int j = 0; j < nj; ++j) torques += ",tau" + std::to_string(j);
  torques += "\n";
  for (const auto& r : trace.records) {
    append_num(torques, r.t);
    for (int j = 0; j < nj; ++j) {
      torques += ',';
      append_num(torques, r.tau(j));
    }
    torques += '\n';
  }
  atomic_write_text(dir + "/joint_torques.csv", torques);
}

std::string describe_terrain(const Terrain& terrain) {
  if (std::holds_alternative<FlatPlane>(terrain)) return "flat";
  if (const auto* p = std::get_if<InclinedPlane>(&terrain)) {
    std::ostringstream s;
    s << "incline_" << rad2deg(p->angle) << "deg";
    return s.str();
  }
  return "heightmap";
}

}  // namespace cobra
