/**
 * @file config.hpp
 * @brief Scenario / configuration file (YAML, schema in docs/formats.md).
 *
 * Every field except `schema_version` is optional and falls back to the
 * defaults below.
 */
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "avoharvest/kinematics.hpp"
#include "avoharvest/perception.hpp"
#include "avoharvest/planner.hpp"
#include "avoharvest/workspace.hpp"

namespace avo {

inline constexpr int kSchemaVersion = 1;

struct WorkspaceParams {
  int steps_per_joint = 37;  ///< 5 degree resolution over [-pi/2, pi/2]
  GridGeometry geometry;
};

struct PlannerParams {
  double pos_tol = 1.0;
  double ori_tol = 0.05;
  double damping = 0.01;
  int max_iterations = 500;
  double max_step = 0.05;
  double trajectory_dt = 0.05;
  RepositionOptions reposition;

  IkOptions ik_options() const;
  TrajectoryOptions trajectory_options() const;
};

/// Arm-frame position (mm) of a point 0.4 m down the camera optical axis.
Eigen::Vector3d default_avocado_center();

struct WorldParams {
  Eigen::Vector3d avocado_center = default_avocado_center();  ///< mm, arm frame
  /// Defaults to the camera optical axis expressed in the arm frame.
  std::optional<Eigen::Vector3d> avocado_axis;
  Eigen::Vector3d semi_axes{35.0, 35.0, 50.0};
  std::vector<Eigen::Vector3d> distractors;
  double elasticity_windup = 0.0;
  double detach_threshold = std::numbers::pi / 2;
  double wrist_limit = std::numbers::pi;
  double peduncle_noise = 0.0;  ///< max anchor perturbation (mm), drawn from `seed`
};

struct SimParams {
  double dt = 0.05;
  double grasp_radius = 15.0;          ///< mm
  double wrist_rate = 1.0;             ///< rad/s
  double finger_close_duration = 0.5;  ///< s
  double dwell = 0.2;                  ///< s between fixer grasp and gripper approach
  bool fixer_enabled = true;
  bool repositioning_enabled = true;
};

struct ScenarioSpec {
  int schema_version = kSchemaVersion;
  std::uint64_t seed = 0;
  ArmModeld gripper = gripper_arm();
  ArmModeld fixer = fixer_arm();
  ChassisBox chassis;
  CameraIntrinsics camera;
  ExtrinsicCalibration extrinsics;
  WorkspaceParams workspace;
  PerceptionOptions perception;
  PlannerParams planner;
  WorldParams world;
  SimParams sim;

  const ArmModeld& arm(ArmId id) const { return id == ArmId::kGripper ? gripper : fixer; }
};

/// @throws ParseError (with line information where available).
ScenarioSpec parse_scenario(const std::string& text);
ScenarioSpec load_scenario(const std::filesystem::path& path);

/// Writes every field, so the output parses back to an equal spec.
void write_scenario(std::ostream& os, const ScenarioSpec& spec);

}  // namespace avo
