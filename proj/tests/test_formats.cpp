#include <doctest.h>

#include <fmt/format.h>

#include <random>
#include <sstream>

#include "avoharvest/formats.hpp"
#include "fixtures.hpp"

using namespace avo;

namespace {

template <typename Writer, typename Value>
std::string bytes(Writer write, const Value& v) {
  std::ostringstream os;
  write(os, v);
  return os.str();
}

std::string le32(std::uint32_t v) {
  std::string s(4, '\0');
  for (int i = 0; i < 4; ++i) s[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
  return s;
}

template <typename Reader>
std::string where_of(Reader read, const std::string& data) {
  std::istringstream is(data);
  try {
    read(is);
  } catch (const ParseError& e) {
    return e.where();
  }
  return "no error";
}

DetectionSet read_masks_str(const std::string& s) {
  std::istringstream is(s);
  return read_masks(is);
}

HarvestReport sample_report() {
  HarvestReport r;
  r.outcome = Outcome::kFixerFail;
  r.wrist_rotation_used = 0.25;
  r.detached = false;
  r.base_translation = Eigen::Vector3d(-300, 80, 440);
  r.peduncle_offset = 35.414;
  r.target_center = Eigen::Vector3d(0.5, -17.0, 450.73);
  r.fixer_grasp_error = 33.5;
  r.message = "fixer missed the peduncle by 33.500 mm";
  r.timeline = {{HarvestPhase::kHome, 0.0}, {HarvestPhase::kPerceive, 0.0}, {HarvestPhase::kPlan, 0.0},
                {HarvestPhase::kFixerStage, 0.0}, {HarvestPhase::kFixerGrasp, 0.75},
                {HarvestPhase::kFailed, 0.75}};
  return r;
}

}  // namespace

TEST_CASE("mask file layout matches a hand-built byte string") {
  DetectionSet d{3, 2, {}};
  MaskImage m(2, 3);
  m << 0, 1, 1,
       1, 0, 0;
  d.masks.push_back(m);
  d.masks.push_back(MaskImage::Ones(2, 3));
  std::string expected = "AVMK";
  expected += std::string("\x01\x00\x00\x00", 4);  // version 1, flags 0
  expected += le32(3) + le32(2) + le32(2);
  expected += le32(3) + le32(1) + le32(3) + le32(2);
  // Runs start with background: a mask that is all ones opens with a zero run.
  expected += le32(2) + le32(0) + le32(6);
  CHECK(bytes(write_masks, d) == expected);

  const DetectionSet back = read_masks_str(expected);
  CHECK(back.width == 3);
  CHECK(back.height == 2);
  REQUIRE(back.count() == 2);
  CHECK((back.masks[0] == m).all());
  CHECK((back.masks[1] == 1).all());
}

TEST_CASE("mask round trip and empty files") {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution coin(0.3);
  DetectionSet d{17, 9, {}};
  for (int k = 0; k < 4; ++k) {
    MaskImage m(9, 17);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = coin(rng) ? 1 : 0;
    d.masks.push_back(m);
  }
  const std::string b = bytes(write_masks, d);
  const DetectionSet back = read_masks_str(b);
  REQUIRE(back.count() == 4);
  for (int k = 0; k < 4; ++k) CHECK((back.masks[static_cast<std::size_t>(k)] == d.masks[static_cast<std::size_t>(k)]).all());
  CHECK(bytes(write_masks, back) == b);

  const DetectionSet empty{848, 480, {}};
  const std::string e = bytes(write_masks, empty);
  CHECK(e.size() == 20);
  CHECK(read_masks_str(e).count() == 0);
}

TEST_CASE("mask parse errors carry byte offsets") {
  DetectionSet d{4, 1, {}};
  MaskImage m(1, 4);
  m << 1, 1, 0, 1;
  d.masks.push_back(m);
  const std::string good = bytes(write_masks, d);  // runs: 0 2 1 1 -> 20 + 4 + 16 = 40 bytes
  REQUIRE(good.size() == 40);

  std::string bad = good;
  bad[0] = 'X';
  CHECK(where_of(read_masks, bad) == "byte 0");
  bad = good;
  bad[4] = 2;
  CHECK(where_of(read_masks, bad) == "byte 4");
  bad = good;
  bad[6] = 1;
  CHECK(where_of(read_masks, bad) == "byte 6");
  CHECK(where_of(read_masks, good.substr(0, 30)) == "byte 28");
  CHECK(where_of(read_masks, good.substr(0, 3)) == "byte 0");
  CHECK(where_of(read_masks, good + "x") == "byte 40");
  bad = good;
  bad[24] = 3;  // first run too long: 3 + 2 + 1 + 1 > 4
  CHECK(where_of(read_masks, bad) != "no error");
  bad = good;
  bad[20] = 0;  // zero runs
  CHECK(where_of(read_masks, bad) == "byte 20");
  bad = good;
  bad[36] = 0;  // runs cover 3 of 4 pixels
  CHECK(where_of(read_masks, bad) == "byte 40");
}

TEST_CASE("depth PGM") {
  DepthImage d(2, 3);
  d << 0.45, 0.0, 1.2345,
       65.535, -1.0, std::numeric_limits<double>::quiet_NaN();
  const std::string b = bytes(write_depth_pgm, d);
  const std::string header = "P5\n3 2\n65535\n";
  REQUIRE(b.size() == header.size() + 12);
  CHECK(b.substr(0, header.size()) == header);
  // 450 mm big-endian.
  CHECK(static_cast<unsigned char>(b[header.size()]) == 0x01);
  CHECK(static_cast<unsigned char>(b[header.size() + 1]) == 0xC2);

  std::istringstream is(b);
  const DepthImage back = read_depth_pgm(is);
  REQUIRE(back.rows() == 2);
  REQUIRE(back.cols() == 3);
  CHECK(back(0, 0) == 0.45);
  CHECK(back(0, 1) == 0.0);
  CHECK(back(0, 2) == doctest::Approx(1.235));
  CHECK(back(1, 0) == 65.535);
  CHECK(back(1, 1) == 0.0);
  CHECK(back(1, 2) == 0.0);

  // Comments in the header and 8-bit data.
  std::istringstream eight(std::string("P5\n# depth\n2 1\n255\n") + std::string("\x05\x00", 2));
  const DepthImage e = read_depth_pgm(eight);
  CHECK(e(0, 0) == 0.005);

  CHECK(where_of(read_depth_pgm, b.substr(0, b.size() - 3)) == fmt::format("byte {}", b.size() - 3));
  CHECK(where_of(read_depth_pgm, "P2\n1 1\n255\n0") == "byte 0");
  CHECK(where_of(read_depth_pgm, "P5\n1 x\n255\n") != "no error");
  CHECK(where_of(read_depth_pgm, "P5\n1 1\n70000\n") != "no error");
  CHECK(where_of(read_depth_pgm, "P5\n1") != "no error");
}

TEST_CASE("estimates round trip") {
  std::mt19937_64 rng(9);
  std::vector<AvocadoEstimate> list;
  for (int i = 0; i < 4; ++i) {
    AvocadoEstimate e;
    e.center = test::random_unit(rng) * 0.7;
    e.rotation = test::random_rotation(rng);
    e.euler = euler_zyx<double>(e.rotation);
    e.distance = 0.3 + 0.1 * i;
    e.frame = i % 2 ? Frame::kArm : Frame::kCamera;
    list.push_back(e);
  }
  const std::string text = bytes(write_estimates, list);
  std::istringstream is(text);
  const auto back = read_estimates(is);
  REQUIRE(back.size() == list.size());
  for (std::size_t i = 0; i < list.size(); ++i) {
    CHECK((back[i].center - list[i].center).norm() < 1e-8);
    CHECK((back[i].rotation - list[i].rotation).norm() < 1e-8);
    CHECK(back[i].distance == doctest::Approx(list[i].distance));
    CHECK(back[i].frame == list[i].frame);
  }
  CHECK(bytes(write_estimates, back) == text);

  std::istringstream none(bytes(write_estimates, std::vector<AvocadoEstimate>{}));
  CHECK(read_estimates(none).empty());
  CHECK(where_of(read_estimates, "# header\narm 1 2 3 0 0 0\n") == "line 2");
  CHECK(where_of(read_estimates, "\nworld 1 2 3 0 0 0 1\n") == "line 2");
  CHECK(where_of(read_estimates, "arm 1 2 x 0 0 0 1\n") == "line 1");
}

TEST_CASE("grid file round trip") {
  const WorkspaceGrid small = build_workspace(gripper_arm(), fixer_arm(), 7, ChassisBox{});
  const std::string text = bytes(write_grid, small);
  CHECK(text.rfind("format avoharvest-grid 1\n", 0) == 0);
  CHECK(text.find("\nvoxel_size 20\n") != std::string::npos);
  std::istringstream is(text);
  const WorkspaceGrid back = read_grid(is);
  CHECK(back == small);
  CHECK(bytes(write_grid, back) == text);

  const auto grid = test::default_grid();
  std::istringstream big(bytes(write_grid, *grid));
  CHECK(read_grid(big) == *grid);

  const WorkspaceGrid one = sample_reachable(gripper_arm(), 3, ChassisBox{});
  std::istringstream partial(bytes(write_grid, one));
  const WorkspaceGrid p = read_grid(partial);
  CHECK(p.has_arm(ArmId::kGripper));
  CHECK_FALSE(p.has_arm(ArmId::kFixer));

  std::string broken = text;
  broken.replace(broken.find("voxel_size 20"), 13, "voxel_size zz");
  CHECK(where_of(read_grid, broken) == "line 3");
  CHECK(where_of(read_grid, text.substr(0, text.size() - 4)) != "no error");
  CHECK(where_of(read_grid, "format avoharvest-grid 2\n") == "line 1");

  // CSV: one row per occupied voxel and arm.
  const std::string csv = bytes(write_grid_points_csv, small);
  const auto rows = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
  CHECK(rows == 1 + small.reachable(ArmId::kGripper).occupied_count() + small.reachable(ArmId::kFixer).occupied_count());
  CHECK(csv.rfind("arm,voxel,x,y,z\n", 0) == 0);
}

TEST_CASE("trajectory CSV round trip") {
  JointTrajectory t;
  t.dt = 0.05;
  t.waypoints = interpolate(Eigen::Vector4d(0, 0.1, -0.2, 0.3), Eigen::Vector4d(0.5, -0.4, 0.3, 0.1), 0.05);
  const std::string text = bytes(write_trajectory_csv, t);
  CHECK(text.rfind("time,q1,q2,q3,q4\n", 0) == 0);
  std::istringstream is(text);
  const JointTrajectory back = read_trajectory_csv(is);
  CHECK(back.waypoints == t.waypoints);
  CHECK(back.dt == doctest::Approx(t.dt));
  CHECK(bytes(write_trajectory_csv, back) == text);

  CHECK(where_of(read_trajectory_csv, "") == "line 1");
  CHECK(where_of(read_trajectory_csv, "t,q1\n") == "line 1");
  CHECK(where_of(read_trajectory_csv, "time,q1\n0,1\n0.05,2,3\n") == "line 3");
  CHECK(where_of(read_trajectory_csv, "time,q1\n0,1\n0.05,2\n0.2,3\n") != "no error");
}

TEST_CASE("report and timeline") {
  const HarvestReport r = sample_report();
  const std::string text = bytes(write_report, r);
  CHECK(text.rfind("outcome: fixer_fail\n", 0) == 0);
  std::istringstream is(text);
  const HarvestReport back = read_report(is);
  CHECK(back.outcome == r.outcome);
  CHECK(back.detached == r.detached);
  CHECK(back.base_translation == r.base_translation);
  REQUIRE(back.target_center);
  CHECK((*back.target_center - *r.target_center).norm() < 1e-6);
  CHECK_FALSE(back.gripper_grasp_error.has_value());
  CHECK(back.message == r.message);
  REQUIRE(back.timeline.size() == r.timeline.size());
  CHECK(back.timeline.back().phase == HarvestPhase::kFailed);
  CHECK(bytes(write_report, back) == text);

  const std::string csv = bytes(write_timeline_csv, r);
  CHECK(csv.rfind("phase,enter_time\nHome,", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == r.timeline.size() + 1);

  CHECK(where_of(read_report, "outcome: success\nfoo: 1\n") == "line 2");
  CHECK(where_of(read_report, "outcome: maybe\n") == "line 1");
  CHECK(where_of(read_report, "detached: true\n") != "no error");
}
