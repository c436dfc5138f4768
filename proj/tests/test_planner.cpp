#include <doctest.h>

#include <random>

#include "avoharvest/planner.hpp"
#include "fixtures.hpp"

using namespace avo;
using avo::test::kPi;

namespace {

AvocadoEstimate arm_estimate(const Eigen::Vector3d& center_mm, const Eigen::Matrix3d& rotation) {
  AvocadoEstimate e;
  e.center = center_mm / 1000.0;
  e.rotation = rotation;
  e.euler = euler_zyx<double>(rotation);
  e.frame = Frame::kArm;
  return e;
}

StagingPair pair_at(const Eigen::Vector3d& avocado, const Eigen::Vector3d& peduncle) {
  StagingPair p;
  p.gripper_target.position = avocado;
  p.fixer_target.position = peduncle;
  return p;
}

// Exhaustive lattice scan written independently of the planner: the
// feasible translation of least norm, lexicographically smallest among ties.
std::optional<Eigen::Vector3d> brute_force_reposition(const StagingPair& p, const WorkspaceGrid& grid) {
  std::optional<Eigen::Vector3i> best;
  for (int i = -25; i <= 25; ++i)
    for (int j = -25; j <= 25; ++j)
      for (int k = -25; k <= 25; ++k) {
        const Eigen::Vector3i c(i, j, k);
        const Eigen::Vector3d t = 20.0 * c.cast<double>();
        if (!task_feasible(p.gripper_target.position - t, p.fixer_target.position - t, grid)) continue;
        if (!best || c.squaredNorm() < best->squaredNorm() ||
            (c.squaredNorm() == best->squaredNorm() &&
             std::lexicographical_compare(c.data(), c.data() + 3, best->data(), best->data() + 3))) {
          best = c;
        }
      }
  if (!best) return std::nullopt;
  return 20.0 * best->cast<double>();
}

}  // namespace

TEST_CASE("staging_poses examples") {
  StagingPair p = staging_poses(arm_estimate(Eigen::Vector3d(300, 50, 0), Eigen::Matrix3d::Identity()));
  CHECK((p.gripper_target.position - Eigen::Vector3d(300, 50, 0)).norm() < 1e-12);
  CHECK((p.fixer_target.position - Eigen::Vector3d(300, 50, 100)).norm() < 1e-12);
  CHECK((p.gripper_target.rotation.col(2) + Eigen::Vector3d::UnitZ()).norm() < 1e-15);
  CHECK((p.fixer_target.rotation.col(2) + Eigen::Vector3d::UnitZ()).norm() < 1e-15);

  // Aligned z along -y.
  Eigen::Matrix3d r;
  r << 1, 0, 0,
       0, 0, -1,
       0, 1, 0;
  r.col(2) = -Eigen::Vector3d::UnitY();
  r.col(1) = r.col(2).cross(r.col(0));
  p = staging_poses(arm_estimate(Eigen::Vector3d(120, -40, 10), r));
  CHECK((p.fixer_target.position - (Eigen::Vector3d(120, -40, 10) - Eigen::Vector3d(0, 100, 0))).norm() < 1e-12);

  p = staging_poses(arm_estimate(Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity()));
  CHECK((p.fixer_target.position - Eigen::Vector3d(0, 0, 100)).norm() < 1e-15);

  AvocadoEstimate cam;
  CHECK_THROWS_AS(staging_poses(cam), DomainError);
}

TEST_CASE("staging pair separation and direction") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Matrix3d r = test::random_rotation(rng);
    const Eigen::Vector3d c = 300.0 * test::random_unit(rng);
    const StagingPair p = staging_poses(arm_estimate(c, r));
    const Eigen::Vector3d d = p.fixer_target.position - p.gripper_target.position;
    CHECK(d.norm() == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(d.normalized().dot(r.col(2)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(is_rotation(p.gripper_target.rotation, 1e-12));
    CHECK(p.gripper_target.rotation.col(2).dot(p.approach_axis) == doctest::Approx(-1.0).epsilon(1e-12));
  }
}

TEST_CASE("solve_ik examples") {
  const ArmModeld g = gripper_arm();
  const Posed target = fk_gripper(Eigen::Vector3d(0.3, -0.4, 0.7));
  const IkResult r = solve_ik(g, target, g.home());
  CHECK((fk_gripper(r.joints).position - target.position).norm() <= 1.0);
  CHECK(r.position_error <= 1.0);
  CHECK(r.orientation_error <= 0.05);
  CHECK(g.within_limits(r.joints));

  try {
    Posed far;
    far.position = Eigen::Vector3d(700, 0, 116.76);
    solve_ik(g, far, g.home());
    FAIL("expected IkError");
  } catch (const IkError& e) {
    CHECK(e.kind() == IkError::Kind::kOutOfReach);
  }

  const Eigen::Vector3d seed(0.2, 0.1, -0.3);
  const IkResult fixed = solve_ik(g, fk_gripper(seed), seed);
  CHECK(fixed.iterations == 0);
  CHECK(fixed.joints == seed);

  CHECK_THROWS_AS(solve_ik(g, target, Eigen::Vector3d(2.0, 0, 0)), DomainError);
  CHECK_THROWS_AS(solve_ik(g, target, Eigen::Vector4d::Zero()), DimensionError);
}

TEST_CASE("solve_ik grid fast-reject and non-convergence") {
  const auto grid = test::default_grid();
  IkOptions opt;
  opt.grid = grid.get();
  Posed inside;  // within reach but no sampled configuration gets there
  inside.position = Eigen::Vector3d(0, 0, 116.76);
  CHECK_FALSE(grid->occupied(ArmId::kGripper, inside.position));
  try {
    solve_ik(gripper_arm(), inside, gripper_arm().home(), opt);
    FAIL("expected IkError");
  } catch (const IkError& e) {
    CHECK(e.kind() == IkError::Kind::kOutOfReach);
  }
  try {
    solve_ik(gripper_arm(), inside, gripper_arm().home());
    FAIL("expected IkError");
  } catch (const IkError& e) {
    CHECK(e.kind() == IkError::Kind::kNoConvergence);
    CHECK(e.residual() > 1.0);
  }
}

TEST_CASE("FK-IK round trip on random configurations") {
  std::mt19937_64 rng(31);
  for (ArmId id : {ArmId::kGripper, ArmId::kFixer}) {
    const ArmModeld arm = id == ArmId::kGripper ? gripper_arm() : fixer_arm();
    int ok = 0;
    for (int i = 0; i < 100; ++i) {
      const Posed target = forward_kinematics(arm, test::random_joints(arm, rng));
      try {
        const IkResult r = solve_ik(arm, target, arm.home());
        ok += (forward_kinematics(arm, r.joints).position - target.position).norm() <= 1.0 ? 1 : 0;
      } catch (const IkError&) {
      }
    }
    CHECK(ok >= 95);
  }
}

TEST_CASE("interpolate and straight trajectories") {
  const ArmModeld f = fixer_arm();
  const JointVectord a = Eigen::Vector4d(0.1, -0.2, 0.3, 0.0);
  const JointTrajectory same = plan_trajectory(f, a, a, ChassisBox{});
  CHECK(same.waypoints.size() == 1);
  CHECK(same.duration() == 0.0);

  std::mt19937_64 rng(12);
  for (int i = 0; i < 50; ++i) {
    const JointVectord s = test::random_joints(f, rng), e = test::random_joints(f, rng);
    const JointTrajectory t = plan_trajectory(f, s, e, ChassisBox::empty());
    const auto segments = static_cast<std::size_t>(std::ceil((e - s).cwiseAbs().maxCoeff() / 0.05));
    CHECK(t.waypoints.size() == segments + 1);
    CHECK(t.waypoints.front() == s);
    CHECK(t.waypoints.back() == e);
    for (std::size_t k = 1; k < t.waypoints.size(); ++k) {
      CHECK((t.waypoints[k] - t.waypoints[k - 1]).cwiseAbs().maxCoeff() <= 0.05 + 1e-12);
      // Straight: every waypoint lies on the segment.
      const JointVectord d = t.waypoints[k] - s;
      CHECK((d - d.dot(e - s) / (e - s).squaredNorm() * (e - s)).norm() < 1e-12);
    }
    CHECK(t.duration() == doctest::Approx(0.05 * static_cast<double>(segments)));
  }
  CHECK_THROWS_AS(interpolate(Eigen::Vector3d::Zero(), Eigen::Vector4d::Zero(), 0.05), DimensionError);
  CHECK_THROWS_AS(plan_trajectory(f, a, Eigen::Vector4d(3, 0, 0, 0), ChassisBox{}), DomainError);
}

TEST_CASE("trajectory detours around a box on the straight path") {
  const ArmModeld f = fixer_arm();
  const JointVectord s = Eigen::Vector4d(-1.0, 0.6, 0.0, 0.4);
  const JointVectord e = Eigen::Vector4d(1.0, 0.6, 0.0, 0.4);
  // Box around the midpoint's end-effector and wrist positions.
  const JointVectord mid = 0.5 * (s + e);
  const auto frames = frame_chain(f, mid);
  const Eigen::Vector3d tip = frames.back().translation();
  const ChassisBox box{tip, Eigen::Vector3d(40, 40, 40)};
  REQUIRE(check_self_collision(f, mid, box));
  REQUIRE_FALSE(check_self_collision(f, s, box));
  REQUIRE_FALSE(check_self_collision(f, e, box));

  const JointTrajectory t = plan_trajectory(f, s, e, box);
  CHECK(t.waypoints.front() == s);
  CHECK(t.waypoints.back() == e);
  for (std::size_t k = 0; k < t.waypoints.size(); ++k) {
    CHECK(f.within_limits(t.waypoints[k]));
    CHECK_FALSE(check_self_collision(f, t.waypoints[k], box));
    if (k > 0) CHECK((t.waypoints[k] - t.waypoints[k - 1]).cwiseAbs().maxCoeff() <= 0.05 + 1e-12);
  }

  // Deterministic for a fixed seed.
  CHECK(plan_trajectory(f, s, e, box).waypoints == t.waypoints);

  // An endpoint inside the box cannot be fixed by a via-point.
  CHECK_THROWS_AS(plan_trajectory(f, s, mid, box), PlanningError);
}

TEST_CASE("base_reposition") {
  const auto grid = test::default_grid();
  const StagingPair ok = pair_at(Eigen::Vector3d(330, 0, -30), Eigen::Vector3d(330, 0, 70));
  const BaseAdjustment none = base_reposition(ok, *grid);
  CHECK_FALSE(none.required);
  CHECK(none.translation == Eigen::Vector3d::Zero());

  // Walk +x to the last feasible 1 mm step, then push 100 mm beyond it.
  double x = 330;
  while (task_feasible(Eigen::Vector3d(x + 1, 0, -30), Eigen::Vector3d(x + 1, 0, 70), *grid)) x += 1;
  const StagingPair beyond = pair_at(Eigen::Vector3d(x + 100, 0, -30), Eigen::Vector3d(x + 100, 0, 70));
  const BaseAdjustment moved = base_reposition(beyond, *grid);
  CHECK(moved.required);
  const auto oracle = brute_force_reposition(beyond, *grid);
  REQUIRE(oracle);
  CHECK(moved.translation == *oracle);
  CHECK(moved.translation.norm() >= 100.0 - 20.0 * std::sqrt(3.0));
  CHECK(moved.translation.norm() <= 140.0);
  CHECK(moved.translation.x() > 0.0);
  CHECK(task_feasible(beyond.gripper_target.position - moved.translation,
                      beyond.fixer_target.position - moved.translation, *grid));

  const StagingPair far = pair_at(Eigen::Vector3d(2000, 0, 0), Eigen::Vector3d(2000, 0, 100));
  CHECK_THROWS_AS(base_reposition(far, *grid), PlanningError);

  // The candidate list starts with the minimum and only holds feasible moves.
  const auto list = reposition_candidates(beyond, *grid, {}, 10);
  REQUIRE_FALSE(list.empty());
  CHECK(list.front().translation == moved.translation);
  for (std::size_t i = 1; i < list.size(); ++i) {
    CHECK(list[i - 1].translation.norm() <= list[i].translation.norm() + 1e-12);
  }
}

TEST_CASE("base_reposition agrees with the exhaustive scan") {
  const auto grid = test::default_grid();
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-150, 150);
  int compared = 0;
  for (int i = 0; i < 6; ++i) {
    const Eigen::Vector3d a = Eigen::Vector3d(330, 0, -30) + Eigen::Vector3d(u(rng), u(rng), u(rng));
    const StagingPair p = pair_at(a, a + Eigen::Vector3d(0, 0, 100));
    const auto oracle = brute_force_reposition(p, *grid);
    if (!oracle) {
      CHECK_THROWS_AS(base_reposition(p, *grid), PlanningError);
      continue;
    }
    CHECK(base_reposition(p, *grid).translation == *oracle);
    ++compared;
  }
  CHECK(compared > 0);
}
