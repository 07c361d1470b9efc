#include "cobra/contact.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cobra {

ContactParams ContactParams::stiff() { return ContactParams{}; }

ContactParams ContactParams::compliant() {
  ContactParams p;
  p.k_n = 1e3;
  p.d_n = 1e4;
  p.transition_width = 0.3;
  return p;
}

void ContactParams::validate() const {
  if (!(k_n > 0)) throw ValidationError("k_n: must be positive");
  if (!(d_n > 0)) throw ValidationError("d_n: must be positive");
  if (!(transition_width > 0))
    throw ValidationError("transition_width: must be positive");
  if (!(mu_s > 0) || !(mu_k > 0)) throw ValidationError("mu: must be positive");
  if (mu_k > mu_s) throw ValidationError("mu_k: must not exceed mu_s");
  if (!(v_crit > 0)) throw ValidationError("v_crit: must be positive");
}

Heightmap load_heightmap(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("heightmap: cannot open " + path);
  Heightmap h;
  std::string key;
  bool have[5] = {false, false, false, false, false};
  for (int i = 0; i < 6 && in >> key; ++i) {
    std::string lower = key;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    double value;
    if (!(in >> value)) throw IoError("heightmap: bad header value for " + key);
    if (lower == "ncols") { h.ncols = static_cast<int>(value); have[0] = true; }
    else if (lower == "nrows") { h.nrows = static_cast<int>(value); have[1] = true; }
    else if (lower == "xllcorner") { h.xllcorner = value; have[2] = true; }
    else if (lower == "yllcorner") { h.yllcorner = value; have[3] = true; }
    else if (lower == "cellsize") { h.cellsize = value; have[4] = true; }
    else if (lower == "nodata_value" || lower == "nodata") { h.nodata = value; }
    else throw IoError("heightmap: unknown header key " + key);
  }
  for (bool b : have)
    if (!b) throw IoError("heightmap: incomplete header in " + path);
  if (h.ncols < 2 || h.nrows < 2)
    throw ValidationError("heightmap: grid must be at least 2x2");
  if (!(h.cellsize > 0)) throw ValidationError("heightmap: cellsize must be positive");
  h.heights.resize(static_cast<size_t>(h.ncols) * h.nrows);
  for (auto& v : h.heights)
    if (!(in >> v)) throw IoError("heightmap: truncated data in " + path);
  for (double v : h.heights)
    if (v != h.nodata && !std::isfinite(v))
      throw ValidationError("heightmap: non-finite height");
  return h;
}

namespace {

// Bilinear patch coefficients h(x,y) = c0 + c1 dx + c2 dy + c3 dx dy over the
// cell containing (x,y); throws on out-of-bounds or nodata corners.
struct PatchInfo {
  double c0, c1, c2, c3;
  double dx, dy;
};

PatchInfo heightmap_patch(const Heightmap& h, double x, double y) {
  const double fx = (x - h.xllcorner) / h.cellsize;
  const double fy = (y - h.yllcorner) / h.cellsize;
  if (fx < 0 || fy < 0 || fx > h.ncols - 1 || fy > h.nrows - 1)
    throw IoError("heightmap: query point outside extent");
  int cx = std::min(static_cast<int>(fx), h.ncols - 2);
  int cy = std::min(static_cast<int>(fy), h.nrows - 2);
  // row 0 holds the top (max y) row per the ASCII grid convention
  const int row_lo = h.nrows - 2 - cy;
  const double z00 = h.at(row_lo + 1, cx);
  const double z10 = h.at(row_lo + 1, cx + 1);
  const double z01 = h.at(row_lo, cx);
  const double z11 = h.at(row_lo, cx + 1);
  for (double z : {z00, z10, z01, z11})
    if (z == h.nodata) throw IoError("heightmap: nodata cell treated as out of bounds");
  PatchInfo p;
  p.dx = fx - cx;
  p.dy = fy - cy;
  p.c0 = z00;
  p.c1 = (z10 - z00) / h.cellsize;
  p.c2 = (z01 - z00) / h.cellsize;
  p.c3 = (z11 - z10 - z01 + z00) / (h.cellsize * h.cellsize);
  return p;
}

double patch_height(const PatchInfo& p, double cs) {
  return p.c0 + p.c1 * (p.dx * cs) + p.c2 * (p.dy * cs) +
         p.c3 * (p.dx * cs) * (p.dy * cs);
}

Vec2 patch_gradient(const PatchInfo& p, double cs) {
  return Vec2(p.c1 + p.c3 * (p.dy * cs), p.c2 + p.c3 * (p.dx * cs));
}

// surface z = h0 - tan(angle) * (downhill . xy); the upward normal leans
// toward the downhill direction
Vec3 plane_normal(const InclinedPlane& t) {
  const double s = std::sin(t.angle), c = std::cos(t.angle);
  return Vec3(s * t.downhill.x(), s * t.downhill.y(), c);
}

}  // namespace

double terrain_surface_height(const Terrain& terrain, double x, double y) {
  if (const auto* f = std::get_if<FlatPlane>(&terrain)) return f->height;
  if (const auto* p = std::get_if<InclinedPlane>(&terrain))
    return p->height - std::tan(p->angle) * (p->downhill.x() * x + p->downhill.y() * y);
  const auto& h = std::get<Heightmap>(terrain);
  const PatchInfo patch = heightmap_patch(h, x, y);
  return patch_height(patch, h.cellsize);
}

Vec3 terrain_normal(const Terrain& terrain, double x, double y) {
  if (std::holds_alternative<FlatPlane>(terrain)) return Vec3::UnitZ();
  if (const auto* p = std::get_if<InclinedPlane>(&terrain)) return plane_normal(*p);
  const auto& h = std::get<Heightmap>(terrain);
  const Vec2 grad = patch_gradient(heightmap_patch(h, x, y), h.cellsize);
  return Vec3(-grad.x(), -grad.y(), 1.0).normalized();
}

GapResult gap(const Terrain& terrain, const Vec3& point, double radius) {
  if (!point.allFinite()) throw ValidationError("point: must be finite");
  GapResult r;
  if (const auto* f = std::get_if<FlatPlane>(&terrain)) {
    r.normal = Vec3::UnitZ();
    r.g = point.z() - f->height - radius;
    return r;
  }
  if (const auto* p = std::get_if<InclinedPlane>(&terrain)) {
    r.normal = plane_normal(*p);
    r.g = r.normal.dot(point - Vec3(0, 0, p->height)) - radius;
    return r;
  }
  const auto& h = std::get<Heightmap>(terrain);
  const PatchInfo patch = heightmap_patch(h, point.x(), point.y());
  r.normal = Vec3(-patch_gradient(patch, h.cellsize).x(),
                  -patch_gradient(patch, h.cellsize).y(), 1.0)
                 .normalized();
  r.g = point.z() - patch_height(patch, h.cellsize) - radius;
  return r;
}

GapResult gap_rates(const RobotModel& model, const GeneralizedState& state,
                    const ContactCandidate& point, const Terrain& terrain,
                    double radius) {
  ChainKinematics kin(model, state);
  const Pose& pose = kin.poses()[point.link];
  const Vec3 p = pose.position + pose.rotation * point.local;
  GapResult r = gap(terrain, p, radius);

  const MatX j = kin.point_jacobian(point.link, p);
  const Vec3 v = kin.point_velocity(point.link, p);
  const Vec3 a_vp = kin.point_acceleration_vp(point.link, p);

  if (std::holds_alternative<Heightmap>(terrain)) {
    const auto& h = std::get<Heightmap>(terrain);
    const PatchInfo patch = heightmap_patch(h, p.x(), p.y());
    const Vec2 grad = patch_gradient(patch, h.cellsize);
    const Vec3 w(-grad.x(), -grad.y(), 1.0);
    r.w_row = (w.transpose() * j).transpose();
    r.zeta = 0.0;
    r.zeta_hat = w.dot(a_vp) - 2.0 * patch.c3 * v.x() * v.y();
  } else {
    r.w_row = (r.normal.transpose() * j).transpose();
    r.zeta = 0.0;
    r.zeta_hat = r.normal.dot(a_vp);
  }
  return r;
}

MatX delassus(const MatX& j_c, const MatX& m) {
  Eigen::LDLT<MatX> ldlt(m);
  const VecX d = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || d.minCoeff() <= 0 ||
      d.minCoeff() < 1e-12 * d.maxCoeff())
    throw SingularityError("delassus: mass matrix not positive definite");
  MatX g = j_c * ldlt.solve(j_c.transpose());
  return 0.5 * (g + g.transpose());
}

namespace {

double smoothstep01(double x) {
  if (x <= 0) return 0.0;
  if (x >= 1) return 1.0;
  return x * x * (3.0 - 2.0 * x);
}

}  // namespace

double normal_force(double g, double g_dot, const ContactParams& params) {
  const double depth = std::max(0.0, -g);
  if (depth == 0.0) return 0.0;
  const double w = params.transition_width;
  // damping scales with penetration (Hunt-Crossley coupling), saturating at w
  const double damp = params.d_n * (-g_dot) * std::min(1.0, depth / w);
  const double f = smoothstep01(depth / w) * (params.k_n * depth + damp);
  return std::max(0.0, f);
}

Vec2 friction_force(const Vec2& v_t, double f_n, const ContactParams& params) {
  const double s = v_t.norm();
  if (s <= 0.0 || f_n <= 0.0) return Vec2::Zero();
  const double x = s / params.v_crit;
  double mu;
  if (x < 1.0) {
    mu = params.mu_s * x * (2.0 - x);
  } else {
    const double d = x - 1.0;
    mu = params.mu_k + (params.mu_s - params.mu_k) * std::exp(-d * d * std::log(4.0));
  }
  return -(v_t / s) * f_n * mu;
}

std::vector<PointForce> ContactSet::point_forces() const {
  std::vector<PointForce> out;
  out.reserve(contacts.size());
  for (const auto& c : contacts)
    out.push_back({c.link, c.world_point, c.world_force});
  return out;
}

Vec3 ContactSet::total_force() const {
  Vec3 f = Vec3::Zero();
  for (const auto& c : contacts) f += c.world_force;
  return f;
}

double ContactSet::total_normal() const {
  double f = 0.0;
  for (const auto& c : contacts) f += c.f_n;
  return f;
}

ContactSet resolve_penalty_contacts(const RobotModel& model,
                                    const GeneralizedState& state,
                                    const Terrain& terrain,
                                    const ContactParams& params) {
  ChainKinematics kin(model, state);
  return resolve_penalty_contacts(kin, terrain, params);
}

ContactSet resolve_penalty_contacts(const ChainKinematics& kin,
                                    const Terrain& terrain,
                                    const ContactParams& params) {
  const RobotModel& model = kin.model();
  ContactSet set;
  for (int k = 0; k < model.link_count(); ++k) {
    const LinkParams& l = model.links[k];
    const double inset = std::min(l.radius, l.length / 2.0);
    const Vec3 proximal = -l.com_offset;
    const Vec3 distal = Vec3(l.length, 0, 0) - l.com_offset;
    const Vec3 axis_pts[3] = {proximal + Vec3(inset, 0, 0),
                              0.5 * (proximal + distal),
                              distal - Vec3(inset, 0, 0)};
    for (int p = 0; p < 3; ++p) {
      const Pose& pose = kin.poses()[k];
      const Vec3 axis_world = pose.position + pose.rotation * axis_pts[p];
      GapResult gr = gap(terrain, axis_world, l.radius);
      if (gr.g >= params.transition_width) continue;

      ResolvedContact c;
      c.link = k;
      c.point_index = p;
      c.normal = gr.normal;
      c.g = gr.g;
      c.world_point = axis_world - l.radius * gr.normal;

      const Vec3 v = kin.point_velocity(k, c.world_point);
      c.g_dot = gr.normal.dot(v);
      c.f_n = normal_force(c.g, c.g_dot, params);

      // deterministic tangent basis around the contact normal
      const Vec3 seed = std::abs(gr.normal.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
      c.tangent_u = seed.cross(gr.normal).normalized();
      c.tangent_v = gr.normal.cross(c.tangent_u);
      const Vec2 v_t(c.tangent_u.dot(v), c.tangent_v.dot(v));
      c.f_t = friction_force(v_t, c.f_n, params);
      c.world_force =
          c.f_n * gr.normal + c.f_t.x() * c.tangent_u + c.f_t.y() * c.tangent_v;
      set.contacts.push_back(c);
    }
  }
  return set;
}

}  // namespace cobra
