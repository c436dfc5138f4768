#include <doctest.h>

#include <sstream>

#include "avoharvest/config.hpp"
#include "fixtures.hpp"

using namespace avo;

namespace {

std::string dump(const ScenarioSpec& s) {
  std::ostringstream os;
  write_scenario(os, s);
  return os.str();
}

std::string where_of(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ParseError& e) {
    return e.where();
  }
  return "no error";
}

}  // namespace

TEST_CASE("minimal scenario gets every default") {
  const ScenarioSpec s = parse_scenario("schema_version: 1\n");
  const ScenarioSpec d;
  CHECK(dump(s) == dump(d));
  CHECK(s.seed == 0);
  CHECK(s.workspace.steps_per_joint == 37);
  CHECK(s.workspace.geometry.voxel_size == 20.0);
  CHECK(s.sim.dwell == 0.2);
  CHECK(s.sim.grasp_radius == 15.0);
  CHECK(s.world.semi_axes == Eigen::Vector3d(35, 35, 50));
  CHECK((s.world.avocado_center - camera_to_arm(Eigen::Vector3d(0, 0, 0.4), ExtrinsicCalibration{}) * 1000.0).norm() <
        1e-12);
}

TEST_CASE("write then parse is a fixed point") {
  ScenarioSpec s;
  s.seed = 1234567890123ULL;
  s.world.avocado_axis = Eigen::Vector3d(0.6, 0.0, 0.8);
  s.world.distractors = {Eigen::Vector3d(1.5, -2.25, 3.125)};
  s.world.elasticity_windup = 2.0943951023931953;
  s.sim.fixer_enabled = false;
  s.perception.center_method = CenterMethod::kCentroid;
  s.chassis.half_extents = Eigen::Vector3d(100, 90, 0.1);
  s.planner.reposition.lattice_bound = 300;
  const std::string text = dump(s);
  const ScenarioSpec back = parse_scenario(text);
  CHECK(dump(back) == text);
  CHECK(back.seed == s.seed);
  CHECK(*back.world.avocado_axis == *s.world.avocado_axis);
  CHECK(back.world.elasticity_windup == s.world.elasticity_windup);
  CHECK(back.extrinsics.rotation == s.extrinsics.rotation);
  CHECK_FALSE(back.sim.fixer_enabled);
  CHECK(back.gripper.rows().size() == 3);
  CHECK(back.fixer.joint_limits().size() == 4);
}

TEST_CASE("scenario files load") {
  for (const char* name : {"nominal.yaml", "fixer_off_windup.yaml", "far_no_reposition.yaml", "peduncle_offset.yaml",
                           "three_avocados.yaml"}) {
    CAPTURE(name);
    const ScenarioSpec s = test::scenario(name);
    CHECK(s.schema_version == 1);
    CHECK(dump(parse_scenario(dump(s))) == dump(s));
  }
  const ScenarioSpec f = test::scenario("fixer_off_windup.yaml");
  CHECK_FALSE(f.sim.fixer_enabled);
  CHECK(f.world.elasticity_windup == doctest::Approx(2.0943951023931953));
}

TEST_CASE("scenario errors") {
  CHECK_THROWS_AS(parse_scenario("seed: 3\n"), ParseError);
  CHECK_THROWS_WITH_AS(parse_scenario("seed: 3\n"), doctest::Contains("schema_version"), ParseError);
  CHECK_THROWS_AS(parse_scenario("schema_version: 2\n"), ParseError);
  CHECK(where_of("schema_version: 1\nseed: 1\nbogus: 3\n") == "line 3");
  CHECK(where_of("schema_version: 1\nsim:\n  dt: 0.05\n  dtt: 1\n") == "line 4");
  CHECK(where_of("schema_version: 1\nworld:\n  avocado_center: [1, 2]\n") == "line 3");
  CHECK(where_of("schema_version: 1\nsim:\n  dt: fast\n") == "line 3");
  CHECK(where_of("schema_version: 1\nsim: [1\n") != "no error");
  CHECK_THROWS_AS(parse_scenario("schema_version: 1\nsim:\n  dt: 0\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("schema_version: 1\nworld:\n  detach_threshold: 4\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("schema_version: 1\ncamera:\n  cx: 900\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("schema_version: 1\nextrinsics:\n  rotation: [[1,0,0],[0,1,0],[0,0,2]]\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_scenario("schema_version: 1\narms:\n  gripper:\n    rows: [[1, 0, 0]]\n    joint_limits: []\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_scenario("- 1\n- 2\n"), ParseError);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.yaml"), ParseError);
}

TEST_CASE("arm overrides") {
  const ScenarioSpec s = parse_scenario(
      "schema_version: 1\n"
      "arms:\n"
      "  gripper:\n"
      "    rows: [[100, 0, 0], [50, 0, 0]]\n");
  CHECK(s.gripper.dof() == 2);
  CHECK(s.gripper.joint_limits().size() == 2);
  CHECK(s.gripper.max_reach() == 150.0);
  CHECK(s.fixer.dof() == 4);
}
