#pragma once

#include <string>
#include <variant>
#include <vector>

#include "cobra/dynamics.hpp"
#include "cobra/robot_model.hpp"
#include "cobra/types.hpp"

namespace cobra {

struct FlatPlane {
  double height = 0.0;
};

struct InclinedPlane {
  double angle = 0.0;      // rad, in [0, pi/3]
  Vec2 downhill = Vec2(1, 0);  // unit, surface height drops along +downhill
  double height = 0.0;     // surface height at the origin
};

// Regular-grid heightmap with bilinear interpolation; nodata cells are
// out of bounds. The terrain is static.
struct Heightmap {
  int ncols = 0, nrows = 0;
  double xllcorner = 0.0, yllcorner = 0.0;
  double cellsize = 0.0;
  double nodata = -9999.0;
  std::vector<double> heights;  // row-major, row 0 at the top (max y)

  double at(int row, int col) const { return heights[row * ncols + col]; }
};

using Terrain = std::variant<FlatPlane, InclinedPlane, Heightmap>;

// ESRI ASCII grid: header keys ncols/nrows/xllcorner/yllcorner/cellsize/
// nodata_value followed by row-major heights.
Heightmap load_heightmap(const std::string& path);

double terrain_surface_height(const Terrain& terrain, double x, double y);
Vec3 terrain_normal(const Terrain& terrain, double x, double y);

struct ContactParams {
  double k_n = 1e4;              // N/m
  double d_n = 1e3;              // N s/m
  double transition_width = 1e-3;  // m
  double mu_s = 0.7;
  double mu_k = 0.5;
  double v_crit = 1e-3;  // m/s

  static ContactParams stiff();
  static ContactParams compliant();
  void validate() const;
};

struct GapResult {
  double g = 0.0;      // signed distance, positive above terrain
  Vec3 normal = Vec3::UnitZ();
  VecX w_row;          // 1 x nu gradient row, g_dot = w_row . u
  double zeta = 0.0;     // residual in g_dot (zero for static terrain)
  double zeta_hat = 0.0;  // u_dot-independent part of g_ddot
};

// Signed distance from the capsule surface around `point` to the terrain.
// Planes measure along the terrain normal; heightmaps measure vertically
// against the bilinear patch.
GapResult gap(const Terrain& terrain, const Vec3& point, double radius);

// Full gap kinematics for one candidate: gradient row, velocity residual and
// the velocity-product part of the gap acceleration.
// The candidate's local offset already sits on the capsule surface, so the
// default radius is zero; pass a radius when querying axis points instead.
GapResult gap_rates(const RobotModel& model, const GeneralizedState& state,
                    const ContactCandidate& point, const Terrain& terrain,
                    double radius = 0.0);

// Delassus operator G = J_c M^-1 J_c^T (apparent inverse inertia at the
// contacts); symmetric positive semidefinite.
MatX delassus(const MatX& j_c, const MatX& m);

// Compliant normal law: smoothstep-gated spring with penetration-scaled
// damping, clamped to be non-adhesive.
double normal_force(double g, double g_dot, const ContactParams& params);

// Smooth stick-slip law: opposes v_t, peaks at mu_s near v_crit and decays to
// the kinetic coefficient.
Vec2 friction_force(const Vec2& v_t, double f_n, const ContactParams& params);

struct ResolvedContact {
  int link = 0;
  int point_index = 0;
  Vec3 world_point = Vec3::Zero();  // application point on the capsule surface
  Vec3 normal = Vec3::UnitZ();
  double g = 0.0;
  double g_dot = 0.0;
  double f_n = 0.0;
  Vec2 f_t = Vec2::Zero();
  Vec3 world_force = Vec3::Zero();
  Vec3 tangent_u = Vec3::Zero(), tangent_v = Vec3::Zero();
};

struct ContactSet {
  std::vector<ResolvedContact> contacts;  // ordered by (link, point_index)

  std::vector<PointForce> point_forces() const;
  Vec3 total_force() const;
  double total_normal() const;
};

// Evaluates the penalty model over all candidates within the activation
// margin (one transition width above touch).
ContactSet resolve_penalty_contacts(const RobotModel& model,
                                    const GeneralizedState& state,
                                    const Terrain& terrain,
                                    const ContactParams& params);
ContactSet resolve_penalty_contacts(const ChainKinematics& kin,
                                    const Terrain& terrain,
                                    const ContactParams& params);

}  // namespace cobra
