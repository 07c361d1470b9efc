#pragma once

#include <string>

#include "cobra/metrics.hpp"
#include "cobra/sim.hpp"

namespace cobra {

// Fixed-schema CSV: t, q[17], u[17], tau[11], per-candidate g/fN/fT triples
// (36 slots in link-point order), com xyz, latch, flags. Decimated to
// trace_hz before writing. All writes go through a temp file + rename.
void write_trace_csv(const SimTrace& trace, const std::string& path,
                     int trace_hz = 100);

void write_metrics_json(const Metrics& metrics, const BearingCheck& bearing,
                        const std::string& scenario_id, const std::string& gait,
                        const std::string& terrain, const std::string& path);

// Plot-ready data: head/CoM trajectories and per-link force plus joint torque
// time series, one CSV per panel.
void write_plot_data(const SimTrace& trace, const std::string& dir);

void atomic_write_text(const std::string& path, const std::string& contents);

std::string describe_terrain(const Terrain& terrain);

}  // namespace cobra
