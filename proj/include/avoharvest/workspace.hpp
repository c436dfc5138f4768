/**
 * @file workspace.hpp
 * @brief Reachable-set sampling under joint limits, chassis self-collision
 *        and task-feasibility queries on a shared voxel grid.
 */
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "avoharvest/kinematics.hpp"

namespace avo {

/// Axis-aligned box standing in for the UAV chassis (mm, body frame).
struct ChassisBox {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extents{220.0, 220.0, 60.0};

  /// Strict interior test; a box with a zero half-extent contains nothing.
  bool contains(const Eigen::Vector3d& p) const {
    return ((p - center).cwiseAbs().array() < half_extents.array()).all();
  }

  /// Euclidean distance to the box surface, negative inside.
  double signed_distance(const Eigen::Vector3d& p) const {
    const Eigen::Vector3d q = (p - center).cwiseAbs() - half_extents;
    const double outside = q.cwiseMax(0.0).norm();
    const double inside = std::min(q.maxCoeff(), 0.0);
    return outside + inside;
  }

  static ChassisBox empty() { return {Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()}; }
};

struct GridGeometry {
  Eigen::Vector3d origin{-500.0, -500.0, -500.0};
  double voxel_size = 20.0;
  std::array<int, 3> dims{50, 50, 50};

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
  /// Linear index (x fastest) of the voxel holding `p`, or nullopt when outside.
  std::optional<std::size_t> voxel_index(const Eigen::Vector3d& p) const;
  Eigen::Vector3d voxel_center(std::size_t index) const;

  bool operator==(const GridGeometry&) const = default;
};

/// Occupancy and one witness configuration per occupied voxel for one arm.
struct ReachableSet {
  bool built = false;
  int steps_per_joint = 0;
  std::uint64_t evaluated = 0;   ///< joint-space samples visited
  std::uint64_t colliding = 0;   ///< samples rejected by the chassis check
  std::vector<std::uint8_t> occupied;
  std::vector<JointVectord> witness;  ///< empty vector for unoccupied voxels

  std::size_t occupied_count() const;
  bool operator==(const ReachableSet& other) const;
};

class WorkspaceGrid {
 public:
  WorkspaceGrid() : WorkspaceGrid(GridGeometry{}) {}
  explicit WorkspaceGrid(GridGeometry geometry);

  const GridGeometry& geometry() const { return geometry_; }
  const ReachableSet& reachable(ArmId arm) const { return sets_[index(arm)]; }
  ReachableSet& reachable(ArmId arm) { return sets_[index(arm)]; }
  bool has_arm(ArmId arm) const { return reachable(arm).built; }

  /// False for points outside the grid bounds.
  bool occupied(ArmId arm, const Eigen::Vector3d& p) const;

  bool operator==(const WorkspaceGrid& other) const {
    return geometry_ == other.geometry_ && sets_ == other.sets_;
  }

 private:
  static std::size_t index(ArmId arm) { return arm == ArmId::kGripper ? 0 : 1; }

  GridGeometry geometry_;
  std::array<ReachableSet, 2> sets_;
};

/// Points sampled along each link segment between consecutive joint origins,
/// from the arm base to the end-effector.
std::vector<Eigen::Vector3d> link_sample_points(const ArmModeld& arm, const JointVectord& q,
                                                int samples_per_segment = 10);

/// True iff any link sample point lies inside the chassis box.
/// @throws DomainError when `q` violates the joint limits.
bool check_self_collision(const ArmModeld& arm, const JointVectord& q, const ChassisBox& chassis);

/// Smallest signed distance from any link sample point to the chassis (mm).
double chassis_clearance(const ArmModeld& arm, const JointVectord& q, const ChassisBox& chassis);

/// Joint angle of grid sample `i` out of `steps` over a joint's limit interval.
double sample_angle(const JointLimit<double>& limit, int i, int steps);

/// Uniform joint-space sweep of one arm. `workers` <= 0 picks the hardware
/// concurrency; the result does not depend on the worker count.
void sample_reachable(WorkspaceGrid& grid, const ArmModeld& arm, int steps_per_joint,
                      const ChassisBox& chassis, int workers = 0);

WorkspaceGrid sample_reachable(const ArmModeld& arm, int steps_per_joint, const ChassisBox& chassis,
                               const GridGeometry& geometry = {}, int workers = 0);

/// Both arms on one grid.
WorkspaceGrid build_workspace(const ArmModeld& gripper, const ArmModeld& fixer, int steps_per_joint,
                              const ChassisBox& chassis, const GridGeometry& geometry = {},
                              int workers = 0);

/// Avocado in a gripper voxel, peduncle in a fixer voxel, both voxels in the
/// two-arm intersection. Out-of-bounds points are infeasible.
/// @throws DomainError when the grid lacks either arm.
bool task_feasible(const Eigen::Vector3d& avocado_pos, const Eigen::Vector3d& peduncle_pos,
                   const WorkspaceGrid& grid);

/// Re-runs FK on every stored witness; returns the voxel indices that fail to map back.
std::vector<std::size_t> verify_witnesses(const WorkspaceGrid& grid, ArmId arm, const ArmModeld& model);

}  // namespace avo
