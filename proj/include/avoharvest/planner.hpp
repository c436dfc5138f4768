/**
 * @file planner.hpp
 * @brief Staging poses, damped least-squares IK, joint-space trajectories and
 *        UAV base repositioning.
 */
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "avoharvest/kinematics.hpp"
#include "avoharvest/perception.hpp"
#include "avoharvest/workspace.hpp"

namespace avo {

/// Peduncle grasp point above the avocado centre along its aligned z axis (mm).
inline constexpr double kPeduncleOffset = 100.0;

struct StagingPair {
  Posed gripper_target;  ///< arm frame, mm
  Posed fixer_target;    ///< arm frame, mm
  Eigen::Vector3d approach_axis = Eigen::Vector3d::UnitZ();
};

/// `target` must be an arm-frame estimate (metres).
/// @throws DomainError for camera-frame input.
StagingPair staging_poses(const AvocadoEstimate& target);

/// Which orientation components the IK solver drives to the target.
enum class OrientationConstraint {
  kNone,          ///< position only
  kApproachAxis,  ///< end-effector z axis (2 DoF)
  kFull,          ///< full rotation (3 DoF)
};

/// Gripper: approach axis; fixer: full rotation.
OrientationConstraint default_orientation_constraint(ArmId arm);

struct IkOptions {
  double pos_tol = 1.0;             ///< mm
  double ori_tol = 0.05;            ///< rad
  double damping = 0.01;
  double orientation_weight = 100.0;  ///< mm per rad in the stacked residual
  int max_iterations = 500;
  std::optional<OrientationConstraint> constraint;  ///< per-arm default when empty
  int restarts = 8;                 ///< deterministic alternative seeds after a failed attempt
  const WorkspaceGrid* grid = nullptr;  ///< optional occupancy fast-reject
};

struct IkResult {
  JointVectord joints;
  double position_error = 0.0;     ///< mm
  double orientation_error = 0.0;  ///< rad, about the constrained axes
  int iterations = 0;
};

/// @throws IkError (kOutOfReach) for targets beyond the arm's reach or outside
///         the optional grid; (kNoConvergence) with the best residual otherwise.
/// @throws DomainError when the seed violates the joint limits.
IkResult solve_ik(const ArmModeld& arm, const Posed& target, const JointVectord& seed,
                  const IkOptions& options = {});

struct JointTrajectory {
  std::vector<JointVectord> waypoints;
  double dt = 0.05;  ///< seconds per segment

  double duration() const {
    return waypoints.size() < 2 ? 0.0 : dt * static_cast<double>(waypoints.size() - 1);
  }
};

struct TrajectoryOptions {
  double max_step = 0.05;  ///< rad per joint between waypoints
  double dt = 0.05;
  std::uint64_t seed = 7;  ///< via-point search restarts
  int max_climb_iterations = 400;
};

/// Straight joint-space interpolation at `max_step` resolution
/// (ceil(max |delta| / max_step) segments).
std::vector<JointVectord> interpolate(const JointVectord& start, const JointVectord& goal, double max_step);

/// Collision-free trajectory, straight if possible, else through one via-point.
/// @throws PlanningError naming the first colliding waypoint.
JointTrajectory plan_trajectory(const ArmModeld& arm, const JointVectord& start, const JointVectord& goal,
                                const ChassisBox& chassis, const TrajectoryOptions& options = {});

struct BaseAdjustment {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();  ///< mm, arm frame
  bool required = false;
};

struct RepositionOptions {
  double lattice_step = 20.0;  ///< mm
  double lattice_bound = 500.0;  ///< mm per axis
};

/// Feasible translations in the order base_reposition tries them, at most `limit`.
/// A single zero translation when the targets are already feasible.
std::vector<BaseAdjustment> reposition_candidates(const StagingPair& pair, const WorkspaceGrid& grid,
                                                  const RepositionOptions& options, std::size_t limit);

/// Moving the base by t shifts both targets by -t in the arm frame.
/// @throws PlanningError when no lattice translation works.
BaseAdjustment base_reposition(const StagingPair& pair, const WorkspaceGrid& grid,
                               const RepositionOptions& options = {});

}  // namespace avo
