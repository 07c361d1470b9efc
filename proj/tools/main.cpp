#include <cstdio>
#include <filesystem>
#include <future>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "cobra/cio.hpp"
#include "cobra/metrics.hpp"
#include "cobra/scenario.hpp"
#include "cobra/trace_io.hpp"
#include "json.hpp"

namespace {

using namespace cobra;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDivergence = 2;
constexpr int kExitOptimization = 3;

struct CommonOpts {
  int trace_hz = 100;
  std::string out_dir;
  bool quiet = false;
};

void apply_out_dir(Scenario& sc, const CommonOpts& opts) {
  if (opts.out_dir.empty()) return;
  namespace fs = std::filesystem;
  fs::create_directories(opts.out_dir);
  sc.outputs.trace_path = opts.out_dir + "/" + sc.id + "_trace.csv";
  sc.outputs.metrics_path = opts.out_dir + "/" + sc.id + "_metrics.json";
  sc.outputs.plot_dir = opts.out_dir + "/" + sc.id + "_plots";
  if (sc.optimize) sc.optimize->audit_path = opts.out_dir + "/" + sc.id + "_audit.jsonl";
}

double metrics_period(const Scenario& sc) {
  if (sc.sim.track_ring) return 0.0;  // segment by ring revolutions
  if (sc.sim.gait.family == GaitFamily::kSidewinding ||
      sc.sim.gait.family == GaitFamily::kVerticalUndulation ||
      sc.sim.gait.family == GaitFamily::kLateralRolling)
    return 1.0 / sc.sim.gait.frequency;
  return 0.0;
}

int run_one(Scenario& sc, const CommonOpts& opts, Metrics* out_metrics,
            SimTrace* out_trace) {
  SimTrace trace = run_scenario(sc.model, sc.sim);
  write_trace_csv(trace, sc.outputs.trace_path, opts.trace_hz);
  Metrics metrics;
  if (!trace.records.empty()) {
    metrics = compute_metrics(trace, metrics_period(sc), sc.patch_area);
    const BearingCheck bearing = bearing_check(metrics, sc.bearing_limit_pa);
    write_metrics_json(metrics, bearing, sc.id, to_string(sc.sim.gait.family),
                       describe_terrain(sc.sim.terrain), sc.outputs.metrics_path);
    if (!sc.outputs.plot_dir.empty()) write_plot_data(trace, sc.outputs.plot_dir);
  }
  if (out_metrics) *out_metrics = metrics;
  if (out_trace) *out_trace = std::move(trace);
  if (out_trace ? out_trace->diverged : false) return kExitDivergence;
  return kExitOk;
}

int cmd_run(const std::string& cfg_path, const CommonOpts& opts) {
  Scenario sc;
  try {
    sc = load_scenario(cfg_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  apply_out_dir(sc, opts);
  Metrics metrics;
  SimTrace trace;
  const int rc = run_one(sc, opts, &metrics, &trace);
  if (trace.diverged) {
    std::cerr << "divergence at t=" << trace.divergence_time << ": "
              << trace.divergence_reason << " (partial artifacts written)\n";
    return kExitDivergence;
  }
  if (!opts.quiet) {
    std::printf("%s: avg_speed=%.4f m/s duty=%.3f peak_normal=%.1f N "
                "avg_power=%.2f W\n",
                sc.id.c_str(), metrics.avg_speed, metrics.duty_factor,
                metrics.peak_normal, metrics.avg_power);
    std::printf("artifacts: %s, %s\n", sc.outputs.trace_path.c_str(),
                sc.outputs.metrics_path.c_str());
  }
  return rc;
}

int cmd_optimize(const std::string& cfg_path, const CommonOpts& opts) {
  Scenario sc;
  try {
    sc = load_scenario(cfg_path);
    if (!sc.optimize)
      throw ValidationError("config: missing [optimize] section");
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  apply_out_dir(sc, opts);
  const OptimizeSpec& spec = *sc.optimize;
  OptimizeResult result;
  try {
    result = optimize_gait(sc.model, sc.sim, spec.family, spec.bounds,
                           spec.budget, spec.objective);
  } catch (const CioConvergenceError& e) {
    std::cerr << "optimization failed: " << e.what() << "\n";
    return kExitOptimization;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  std::string audit;
  for (const auto& entry : result.audit) {
    nlohmann::json j;
    j["amp_h_deg"] = rad2deg(entry.gait.amp_h);
    j["amp_v_deg"] = rad2deg(entry.gait.amp_v);
    j["frequency_hz"] = entry.gait.frequency;
    j["objective"] = entry.failed ? nlohmann::json(nullptr)
                                  : nlohmann::json(entry.objective);
    j["displacement_m"] = entry.displacement;
    j["effort_J"] = entry.effort;
    j["failed"] = entry.failed;
    audit += j.dump() + "\n";
  }
  atomic_write_text(spec.audit_path, audit);

  nlohmann::json best;
  best["family"] = to_string(result.best.family);
  best["amp_h_deg"] = rad2deg(result.best.amp_h);
  best["amp_v_deg"] = rad2deg(result.best.amp_v);
  best["frequency_hz"] = result.best.frequency;
  best["objective"] = result.best_objective;
  atomic_write_text(sc.outputs.metrics_path, best.dump(2) + "\n");
  if (!opts.quiet) {
    std::printf("best gait: amp_h=%.1f deg amp_v=%.1f deg f=%.2f Hz "
                "objective=%.4f\n",
                rad2deg(result.best.amp_h), rad2deg(result.best.amp_v),
                result.best.frequency, result.best_objective);
    std::printf("audit: %s (%zu evaluations)\n", spec.audit_path.c_str(),
                result.audit.size());
  }
  return kExitOk;
}

int cmd_compare(const std::string& cfg_a, const std::string& cfg_b,
                const CommonOpts& opts) {
  Scenario a, b;
  try {
    a = load_scenario(cfg_a);
    b = load_scenario(cfg_b);
    if (std::abs(a.sim.duration - b.sim.duration) > 1e-12)
      throw ValidationError("compare: scenario durations differ");
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  apply_out_dir(a, opts);
  apply_out_dir(b, opts);

  auto fut_a = std::async(std::launch::async,
                          [&]() { return run_scenario(a.model, a.sim); });
  SimTrace trace_b = run_scenario(b.model, b.sim);
  SimTrace trace_a = fut_a.get();
  write_trace_csv(trace_a, a.outputs.trace_path, opts.trace_hz);
  write_trace_csv(trace_b, b.outputs.trace_path, opts.trace_hz);
  if (trace_a.diverged || trace_b.diverged) {
    std::cerr << "divergence during comparison\n";
    return kExitDivergence;
  }

  // paired series at 100 Hz: distance along goal and CoM height above terrain
  auto series = [](const Scenario& sc, const SimTrace& full) {
    const int factor =
        std::max(1, static_cast<int>(std::lround((1.0 / full.dt) / 100.0)));
    const SimTrace tr = full.decimated(factor);
    std::vector<std::array<double, 3>> rows;
    const Vec2 goal = sc.sim.goal_direction.normalized();
    const Vec3 start = tr.records.front().com;
    for (const auto& r : tr.records) {
      const Vec2 d(r.com.x() - start.x(), r.com.y() - start.y());
      const double h =
          r.com.z() - terrain_surface_height(sc.sim.terrain, r.com.x(), r.com.y());
      rows.push_back({r.t, d.dot(goal), h});
    }
    return rows;
  };
  const auto rows_a = series(a, trace_a);
  const auto rows_b = series(b, trace_b);

  std::string csv = "t,dist_a,height_a,dist_b,height_b\n";
  const size_t n = std::min(rows_a.size(), rows_b.size());
  for (size_t i = 0; i < n; ++i) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%.12g,%.12g\n",
                  rows_a[i][0], rows_a[i][1], rows_a[i][2], rows_b[i][1],
                  rows_b[i][2]);
    csv += buf;
  }
  const std::string out_dir = opts.out_dir.empty() ? "." : opts.out_dir;
  atomic_write_text(out_dir + "/compare_" + a.id + "_vs_" + b.id + ".csv", csv);

  const Metrics ma = compute_metrics(trace_a, metrics_period(a), a.patch_area);
  const Metrics mb = compute_metrics(trace_b, metrics_period(b), b.patch_area);
  nlohmann::json j;
  j["a"] = {{"id", a.id},
            {"distance_m", rows_a.back()[1]},
            {"peak_normal_N", ma.peak_normal},
            {"avg_speed_mps", ma.avg_speed}};
  j["b"] = {{"id", b.id},
            {"distance_m", rows_b.back()[1]},
            {"peak_normal_N", mb.peak_normal},
            {"avg_speed_mps", mb.avg_speed}};
  atomic_write_text(out_dir + "/compare_" + a.id + "_vs_" + b.id + ".json",
                    j.dump(2) + "\n");
  if (!opts.quiet) {
    std::printf("%s: dist=%.3f m peak_normal=%.1f N\n", a.id.c_str(),
                rows_a.back()[1], ma.peak_normal);
    std::printf("%s: dist=%.3f m peak_normal=%.1f N\n", b.id.c_str(),
                rows_b.back()[1], mb.peak_normal);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"articulated snake robot gait simulator"};
  app.require_subcommand(1);
  CommonOpts opts;
  app.add_option("--trace-hz", opts.trace_hz, "trace output rate (default 100)");
  app.add_option("--out", opts.out_dir, "redirect artifacts to this directory");
  app.add_flag("--quiet", opts.quiet, "suppress summary output");

  std::string cfg, cfg_b;
  auto* run = app.add_subcommand("run", "simulate a scenario config");
  run->add_option("config", cfg, "scenario config path")->required();
  auto* optimize = app.add_subcommand("optimize", "gait parameter search");
  optimize->add_option("config", cfg, "scenario config path")->required();
  auto* compare = app.add_subcommand("compare", "run two scenarios side by side");
  compare->add_option("config_a", cfg, "first scenario")->required();
  compare->add_option("config_b", cfg_b, "second scenario")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return cmd_run(cfg, opts);
    if (optimize->parsed()) return cmd_optimize(cfg, opts);
    if (compare->parsed()) return cmd_compare(cfg, cfg_b, opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
