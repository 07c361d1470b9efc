#include "cobra/scenario.hpp"

#include "cobra/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cobra {

namespace {

struct ConfigData {
  // section -> key -> value (verbatim strings)
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::string path;

  bool has(const std::string& sec, const std::string& key) const {
    auto s = sections.find(sec);
    return s != sections.end() && s->second.count(key) > 0;
  }
  std::string raw(const std::string& sec, const std::string& key) const {
    return sections.at(sec).at(key);
  }
  std::string str(const std::string& sec, const std::string& key,
                  const std::string& fallback) const {
    return has(sec, key) ? raw(sec, key) : fallback;
  }
  double num(const std::string& sec, const std::string& key, double fallback) const {
    if (!has(sec, key)) return fallback;
    return parse_num(sec, key, raw(sec, key));
  }
  double require_num(const std::string& sec, const std::string& key) const {
    if (!has(sec, key))
      throw ValidationError("config: missing [" + sec + "] " + key);
    return parse_num(sec, key, raw(sec, key));
  }
  double parse_num(const std::string& sec, const std::string& key,
                   const std::string& v) const {
    try {
      size_t used = 0;
      double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ValidationError("config: [" + sec + "] " + key +
                            ": not a number: '" + v + "'");
    }
  }
  Vec2 vec2(const std::string& sec, const std::string& key, const Vec2& fallback) const {
    if (!has(sec, key)) return fallback;
    std::istringstream in(raw(sec, key));
    double a, b;
    if (!(in >> a >> b))
      throw ValidationError("config: [" + sec + "] " + key + ": expected two numbers");
    return Vec2(a, b);
  }
  Vec3 vec3(const std::string& sec, const std::string& key, const Vec3& fallback) const {
    if (!has(sec, key)) return fallback;
    std::istringstream in(raw(sec, key));
    double a, b, c;
    if (!(in >> a >> b >> c))
      throw ValidationError("config: [" + sec + "] " + key + ": expected three numbers");
    return Vec3(a, b, c);
  }
};

ConfigData parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path);
  ConfigData cfg;
  cfg.path = path;
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of(";#");
    if (comment != std::string::npos) line = line.substr(0, comment);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ValidationError("config: line " + std::to_string(line_no) +
                              ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      cfg.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config: line " + std::to_string(line_no) +
                            ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty())
      throw ValidationError("config: line " + std::to_string(line_no) +
                            ": key outside any section");
    cfg.sections[section][key] = value;
  }
  return cfg;
}

std::string dirname_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? std::string(".") : path.substr(0, slash);
}

std::string resolve_path(const std::string& base_dir, const std::string& p) {
  if (p.empty() || p.front() == '/') return p;
  return base_dir + "/" + p;
}

}  // namespace

double straight_rest_penetration(const RobotModel& model,
                                 const ContactParams& contact) {
  // per link: 3 candidates share the link weight through the gated spring
  const double weight = model.links[0].mass * 9.81;
  auto force = [&](double depth) {
    return 3.0 * normal_force(-depth, 0.0, contact);
  };
  double lo = 0.0, hi = contact.transition_width;
  while (force(hi) < weight) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (force(mid) < weight ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

GeneralizedState make_straight_state(const RobotModel& model,
                                     const Terrain& terrain,
                                     const ContactParams& contact,
                                     const Vec2& xy, double yaw) {
  GeneralizedState st = GeneralizedState::zero(model);
  st.orientation_ref = Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
  st.head_position = Vec3(xy.x(), xy.y(), 0.0);
  const double surf = terrain_surface_height(terrain, xy.x(), xy.y());
  const double depth = straight_rest_penetration(model, contact);
  st.head_position.z() = surf + model.links[0].radius - depth;
  return st;
}

GeneralizedState make_ring_state(const RobotModel& model, const Terrain& terrain,
                                 const JointVector& q_joint, const Vec2& downhill,
                                 double release_tilt, double lean, const Vec2& xy) {
  GeneralizedState st = GeneralizedState::zero(model);
  st.q_joint = q_joint;

  // identity heading forms the ring in the x-z plane with axis along +y;
  // rotate that axis onto the cross-slope direction
  const Vec3 d_hat(downhill.normalized().x(), downhill.normalized().y(), 0.0);
  const Vec3 axis_target = Vec3::UnitZ().cross(d_hat).normalized();
  Mat3 r0 = Quat::FromTwoVectors(Vec3::UnitY(), axis_target).toRotationMatrix();
  Mat3 r = Eigen::AngleAxisd(lean, d_hat).toRotationMatrix() *
           Eigen::AngleAxisd(release_tilt, axis_target).toRotationMatrix() * r0;
  st.orientation_ref = Quat(r);

  // center the ring on (xy), then drop until the lowest candidate touches
  ChainKinematics kin(model, st);
  Vec3 center = Vec3::Zero();
  for (const auto& p : kin.poses()) center += p.position;
  center /= model.link_count();
  st.head_position = Vec3(xy.x() - center.x(), xy.y() - center.y(), 0.0);

  // drop along z until the lowest candidate touches; an inclined plane
  // measures gaps along its normal, so the vertical shift is g / n_z
  const double slope_nz = std::holds_alternative<InclinedPlane>(terrain)
                              ? std::cos(std::get<InclinedPlane>(terrain).angle)
                              : 1.0;
  for (int pass = 0; pass < 3; ++pass) {
    double min_gap = 1e30;
    ChainKinematics kin2(model, st);
    for (int k = 0; k < model.link_count(); ++k) {
      const LinkParams& l = model.links[k];
      const double inset = std::min(l.radius, l.length / 2.0);
      const Vec3 proximal = -l.com_offset;
      const Vec3 distal = Vec3(l.length, 0, 0) - l.com_offset;
      const Vec3 axis_pts[3] = {proximal + Vec3(inset, 0, 0),
                                0.5 * (proximal + distal),
                                distal - Vec3(inset, 0, 0)};
      for (const Vec3& ap : axis_pts) {
        const Vec3 w = kin2.poses()[k].position + kin2.poses()[k].rotation * ap;
        min_gap = std::min(min_gap, gap(terrain, w, l.radius).g);
      }
    }
    st.head_position.z() -= min_gap / slope_nz;
    if (std::abs(min_gap) < 1e-12) break;
  }
  return st;
}

Scenario load_scenario(const std::string& path) {
  const ConfigData cfg = parse_config(path);
  const std::string base_dir = dirname_of(path);

  Scenario sc;
  {
    auto name = path.substr(path.find_last_of('/') + 1);
    const auto dot = name.find_last_of('.');
    sc.id = dot == std::string::npos ? name : name.substr(0, dot);
  }

  std::map<std::string, double> overrides;
  if (cfg.sections.count("model")) {
    for (const auto& [key, value] : cfg.sections.at("model"))
      overrides[key] = cfg.parse_num("model", key, value);
  }
  sc.model = build_cobra_model(overrides);

  // terrain
  const std::string t_type = cfg.str("terrain", "type", "flat");
  Vec2 downhill = cfg.vec2("terrain", "downhill", Vec2(0, 1));
  if (downhill.norm() < 1e-12)
    throw ValidationError("config: [terrain] downhill: zero vector");
  downhill.normalize();
  if (t_type == "flat") {
    sc.sim.terrain = FlatPlane{cfg.num("terrain", "height", 0.0)};
  } else if (t_type == "incline") {
    InclinedPlane p;
    p.angle = deg2rad(cfg.require_num("terrain", "angle_deg"));
    p.downhill = downhill;
    p.height = cfg.num("terrain", "height", 0.0);
    sc.sim.terrain = p;
  } else if (t_type == "heightmap") {
    if (!cfg.has("terrain", "file"))
      throw ValidationError("config: missing [terrain] file");
    sc.sim.terrain = load_heightmap(resolve_path(base_dir, cfg.raw("terrain", "file")));
  } else {
    throw ValidationError("config: [terrain] type: unknown '" + t_type + "'");
  }

  // contact preset
  const std::string preset = cfg.str("contact", "preset", "stiff");
  if (preset == "stiff") sc.sim.contact = ContactParams::stiff();
  else if (preset == "compliant") sc.sim.contact = ContactParams::compliant();
  else if (preset == "custom") sc.sim.contact = ContactParams{};
  else throw ValidationError("config: [contact] preset: unknown '" + preset + "'");
  sc.sim.contact.k_n = cfg.num("contact", "k_n", sc.sim.contact.k_n);
  sc.sim.contact.d_n = cfg.num("contact", "d_n", sc.sim.contact.d_n);
  sc.sim.contact.transition_width =
      cfg.num("contact", "transition_width", sc.sim.contact.transition_width);
  sc.sim.contact.mu_s = cfg.num("contact", "mu_s", sc.sim.contact.mu_s);
  sc.sim.contact.mu_k = cfg.num("contact", "mu_k", sc.sim.contact.mu_k);
  sc.sim.contact.v_crit = cfg.num("contact", "v_crit", sc.sim.contact.v_crit);
  sc.sim.contact.validate();

  // gait
  const std::string family = cfg.str("gait", "family", "none");
  sc.sim.gait.family = gait_family_from_string(family);
  sc.sim.gait.amp_h = deg2rad(cfg.num("gait", "amp_h_deg", 0.0));
  sc.sim.gait.amp_v = deg2rad(cfg.num("gait", "amp_v_deg", 0.0));
  sc.sim.gait.frequency = cfg.num("gait", "frequency_hz", 0.5);
  sc.sim.gait.phase_per_joint =
      deg2rad(cfg.num("gait", "phase_per_joint_deg", 60.0));
  sc.sim.gait.wave_phase_offset =
      deg2rad(cfg.num("gait", "wave_phase_offset_deg", 90.0));
  sc.sim.gait.latch_offset = deg2rad(cfg.num("gait", "latch_offset_deg", 4.0));
  sc.sim.gait.transform_duration = cfg.num("gait", "transform_duration", 8.0);
  sc.sim.gait.helix_pitch_angle = cfg.num("gait", "helix_pitch", 0.15);
  if (sc.sim.gait.family != GaitFamily::kNone) sc.sim.gait.validate();

  // sim basics
  sc.sim.dt = cfg.num("sim", "dt", 1e-3);
  sc.sim.duration = cfg.num("sim", "duration", 10.0);
  sc.sim.gravity = cfg.vec3("sim", "gravity", kStandardGravity);
  sc.sim.seed = static_cast<uint64_t>(cfg.num("sim", "seed", 0.0));
  sc.sim.goal_direction = cfg.vec2("sim", "goal_direction", downhill);
  sc.sim.scenario_id = sc.id;

  // initial placement
  const std::string initial = cfg.str("sim", "initial", "straight");
  const Vec2 xy = cfg.vec2("sim", "initial_xy", Vec2::Zero());
  if (initial == "straight") {
    sc.sim.initial = make_straight_state(
        sc.model, sc.sim.terrain, sc.sim.contact, xy,
        deg2rad(cfg.num("sim", "initial_yaw_deg", 0.0)));
  } else if (initial == "hexring" || initial == "spiral") {
    JointVector qj = initial == "hexring"
                         ? hexring_configuration(sc.model)
                         : spiral_configuration(sc.model,
                                                cfg.num("sim", "helix_pitch", 0.15));
    sc.sim.initial = make_ring_state(
        sc.model, sc.sim.terrain, qj, downhill,
        deg2rad(cfg.num("sim", "release_tilt_deg", 0.0)),
        deg2rad(cfg.num("sim", "initial_lean_deg", 0.0)), xy);
    sc.sim.track_ring = true;
    sc.sim.latch_engaged = initial == "hexring";
  } else {
    throw ValidationError("config: [sim] initial: unknown '" + initial + "'");
  }
  if (cfg.has("sim", "latch")) {
    const std::string latch = cfg.raw("sim", "latch");
    if (latch == "engaged") sc.sim.latch_engaged = true;
    else if (latch == "open") sc.sim.latch_engaged = false;
    else if (latch != "auto")
      throw ValidationError("config: [sim] latch: unknown '" + latch + "'");
  }
  sc.sim.validate();

  // outputs
  sc.outputs.trace_path =
      resolve_path(base_dir, cfg.str("outputs", "trace", "trace.csv"));
  sc.outputs.metrics_path =
      resolve_path(base_dir, cfg.str("outputs", "metrics", "metrics.json"));
  sc.outputs.plot_dir = cfg.str("outputs", "plot_dir", "");
  if (!sc.outputs.plot_dir.empty())
    sc.outputs.plot_dir = resolve_path(base_dir, sc.outputs.plot_dir);
  sc.outputs.trace_hz = static_cast<int>(cfg.num("outputs", "trace_hz", 100));

  sc.bearing_limit_pa = cfg.num("metrics", "bearing_limit_pa", kDefaultBearingLimitPa);
  sc.patch_area = cfg.num("metrics", "patch_area", kDefaultPatchArea);

  // optimize (optional)
  if (cfg.sections.count("optimize")) {
    OptimizeSpec opt;
    opt.family = gait_family_from_string(cfg.str("optimize", "family", "sidewinding"));
    opt.budget = static_cast<int>(cfg.num("optimize", "budget", 16));
    const Vec2 ah = cfg.vec2("optimize", "amp_h_deg", Vec2(20, 60));
    const Vec2 av = cfg.vec2("optimize", "amp_v_deg", Vec2(10, 35));
    opt.bounds.amp_h = Vec2(deg2rad(ah.x()), deg2rad(ah.y()));
    opt.bounds.amp_v = Vec2(deg2rad(av.x()), deg2rad(av.y()));
    opt.bounds.frequency = cfg.vec2("optimize", "frequency_hz", Vec2(0.2, 0.6));
    opt.objective.w_displacement = cfg.num("optimize", "w_disp", 1.0);
    opt.objective.w_effort = cfg.num("optimize", "w_effort", 0.01);
    opt.audit_path =
        resolve_path(base_dir, cfg.str("optimize", "audit", "audit.jsonl"));
    sc.optimize = opt;
  }
  return sc;
}

}  // namespace cobra
