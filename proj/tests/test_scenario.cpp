#include <cstdio>
#include <fstream>

#include "cobra/scenario.hpp"
#include "cobra/trace_io.hpp"
#include "doctest.h"

using namespace cobra;

namespace {

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

}  // namespace

TEST_CASE("scenario config round trip") {
  write_file("tmp_scn.cfg",
             "[terrain]\n"
             "type = incline\n"
             "angle_deg = 10\n"
             "downhill = 0 1\n"
             "[contact]\n"
             "preset = stiff\n"
             "[gait]\n"
             "family = none\n"
             "[sim]\n"
             "dt = 0.001\n"
             "duration = 2.0\n"
             "initial = hexring\n"
             "release_tilt_deg = 33\n"
             "[outputs]\n"
             "trace = tmp_trace.csv\n"
             "metrics = tmp_metrics.json\n");
  const Scenario sc = load_scenario("tmp_scn.cfg");
  CHECK(sc.id == "tmp_scn");
  CHECK(sc.sim.duration == doctest::Approx(2.0));
  CHECK(sc.sim.latch_engaged);
  CHECK(sc.sim.track_ring);
  CHECK(std::get<InclinedPlane>(sc.sim.terrain).angle ==
        doctest::Approx(deg2rad(10)));

  // the ring starts touching the slope: min gap ~ 0
  auto kin = ChainKinematics(sc.model, sc.sim.initial);
  double min_gap = 1e9;
  const auto set =
      resolve_penalty_contacts(kin, sc.sim.terrain, sc.sim.contact);
  for (const auto& c : set.contacts) min_gap = std::min(min_gap, c.g);
  CHECK(std::abs(min_gap) < 1e-9);
  std::remove("tmp_scn.cfg");
}

TEST_CASE("malformed configs name the problem") {
  write_file("tmp_bad1.cfg", "[terrain]\ntype = incline\n");
  CHECK_THROWS_WITH_AS(load_scenario("tmp_bad1.cfg"),
                       doctest::Contains("angle_deg"), ValidationError);
  write_file("tmp_bad2.cfg", "[gait]\nfamily = warp_drive\n");
  CHECK_THROWS_WITH_AS(load_scenario("tmp_bad2.cfg"),
                       doctest::Contains("family"), ValidationError);
  write_file("tmp_bad3.cfg", "[sim]\ndt = fast\n");
  CHECK_THROWS_AS(load_scenario("tmp_bad3.cfg"), ValidationError);
  write_file("tmp_bad4.cfg", "stray = 1\n");
  CHECK_THROWS_AS(load_scenario("tmp_bad4.cfg"), ValidationError);
  CHECK_THROWS_AS(load_scenario("no_such_file.cfg"), ValidationError);
  for (const char* f : {"tmp_bad1.cfg", "tmp_bad2.cfg", "tmp_bad3.cfg", "tmp_bad4.cfg"})
    std::remove(f);
}

TEST_CASE("straight placement rests at the analytic penetration") {
  const RobotModel model = build_cobra_model();
  const ContactParams contact = ContactParams::stiff();
  const double depth = straight_rest_penetration(model, contact);
  CHECK(depth > 0.0);
  CHECK(depth < contact.transition_width);
  // three candidates at that depth carry one link's weight
  const double f = 3.0 * normal_force(-depth, 0.0, contact);
  CHECK(f == doctest::Approx(0.60 * 9.81).epsilon(1e-9));

  const GeneralizedState st =
      make_straight_state(model, FlatPlane{0.0}, contact);
  const ContactSet set =
      resolve_penalty_contacts(model, st, FlatPlane{0.0}, contact);
  CHECK(set.total_normal() ==
        doctest::Approx(model.total_mass() * 9.81).epsilon(1e-6));
}

TEST_CASE("trace CSV write is deterministic and atomic") {
  const RobotModel model = build_cobra_model();
  SimConfig config;
  config.terrain = FlatPlane{0.0};
  config.contact = ContactParams::stiff();
  config.initial = make_straight_state(model, config.terrain, config.contact);
  config.duration = 0.2;
  const SimTrace trace = run_scenario(model, config);

  write_trace_csv(trace, "tmp_a.csv", 100);
  write_trace_csv(trace, "tmp_b.csv", 100);
  std::ifstream a("tmp_a.csv"), b("tmp_b.csv");
  std::string sa((std::istreambuf_iterator<char>(a)), {});
  std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
  CHECK(sa.find("t,q0") == 0);
  // 0.2 s at 100 Hz: 20 rows + header
  size_t rows = 0;
  for (char ch : sa) rows += ch == '\n';
  CHECK(rows == 21);
  std::remove("tmp_a.csv");
  std::remove("tmp_b.csv");
}
