/**
 * @file harvest_sim.hpp
 * @brief Deterministic harvest state machine over a simulated avocado with an
 *        elastic peduncle, plus the synthetic depth renderer that feeds it.
 *
 * Phase order of a successful run:
 *   Home, Perceive, Plan, FixerStage, FixerGrasp, Dwell, GripperStage,
 *   FingerClose, WristRotate, Retrieve, ReturnHome, Done
 * Failed is entered only from Plan, FixerGrasp, FingerClose or WristRotate.
 *
 * The peduncle is a scalar model: without the fixer holding it, detaching
 * needs `elasticity_windup` of extra wrist rotation.
 */
#pragma once

#include <Eigen/Dense>

#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "avoharvest/config.hpp"
#include "avoharvest/perception.hpp"
#include "avoharvest/planner.hpp"
#include "avoharvest/workspace.hpp"

namespace avo {

struct SimWorld {
  // All positions in the current arm base frame (mm). Moving the UAV base
  // by t shifts every world point by -t.
  Eigen::Vector3d avocado_center = Eigen::Vector3d::Zero();
  Eigen::Vector3d avocado_axis = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d peduncle_anchor = Eigen::Vector3d(0.0, 0.0, kPeduncleOffset);
  Eigen::Vector3d semi_axes{35.0, 35.0, 50.0};  ///< last one along avocado_axis
  std::vector<Eigen::Vector3d> distractors;      ///< extra avocados, same shape and axis

  double elasticity_windup = 0.0;                   ///< rad
  double detach_threshold = std::numbers::pi / 2;   ///< rad
  double wrist_limit = std::numbers::pi;            ///< rad
  bool attached = true;
  bool fixer_engaged = false;

  Eigen::Vector3d base_translation = Eigen::Vector3d::Zero();  ///< accumulated UAV move (mm)
  JointVectord gripper_joints = JointVectord::Zero(3);
  JointVectord fixer_joints = JointVectord::Zero(4);

  /// Shifts all world points by -t and records the base move.
  void translate_base(const Eigen::Vector3d& t);
};

/// Builds the initial world of a scenario, applying the seeded peduncle
/// perturbation. Returns the world and the applied anchor offset (mm).
std::pair<SimWorld, Eigen::Vector3d> make_world(const ScenarioSpec& spec);

enum class HarvestPhase {
  kHome, kPerceive, kPlan, kFixerStage, kFixerGrasp, kDwell, kGripperStage,
  kFingerClose, kWristRotate, kRetrieve, kReturnHome, kDone, kFailed,
};

std::string_view to_string(HarvestPhase phase);
HarvestPhase phase_from_string(std::string_view name);

enum class Outcome { kSuccess, kFixerFail, kGripperFail, kPlanFail };

std::string_view to_string(Outcome outcome);
Outcome outcome_from_string(std::string_view name);

/// Legal successor relation of the state machine.
bool is_legal_transition(HarvestPhase from, HarvestPhase to);

struct HarvestPlan {
  StagingPair staging;  ///< after any base move
  BaseAdjustment base;
  JointVectord fixer_goal;
  JointVectord gripper_goal;
  JointTrajectory fixer_approach;
  JointTrajectory gripper_approach;
  JointTrajectory fixer_return;
  JointTrajectory gripper_return;
};

struct HarvestState {
  HarvestPhase phase = HarvestPhase::kHome;
  double elapsed = 0.0;  ///< time spent in the current phase (s)
  double clock = 0.0;    ///< simulated time since start (s)
  double wrist_angle = 0.0;
  std::optional<Outcome> failure;
  std::optional<AvocadoEstimate> target;  ///< arm-frame estimate chosen in Perceive
  std::optional<HarvestPlan> plan;
  std::string message;  ///< reason for the last failure
};

/// With the fixer holding the peduncle, the avocado detaches at
/// `detach_threshold`; otherwise at threshold + windup. A requirement beyond
/// the wrist limit can never be met.
bool detach_rule(const SimWorld& world, double wrist_angle);

/// Wrist angle needed to detach, or nullopt when mechanically unreachable.
std::optional<double> detach_requirement(const SimWorld& world);

struct SyntheticScene {
  DetectionSet detections;
  DepthImage depth;
};

/// Ray-cast every avocado ellipsoid into a depth image with occlusion-aware masks.
/// @throws DomainError for an avocado behind the camera or outside the frustum.
SyntheticScene render_synthetic_scene(const SimWorld& world, const CameraIntrinsics& intr,
                                      const ExtrinsicCalibration& calib);

struct TimelineEntry {
  HarvestPhase phase;
  double enter_time;
};

struct HarvestReport {
  Outcome outcome = Outcome::kPlanFail;
  double wrist_rotation_used = 0.0;
  std::vector<TimelineEntry> timeline;
  bool detached = false;
  Eigen::Vector3d base_translation = Eigen::Vector3d::Zero();
  double peduncle_offset = 0.0;  ///< magnitude of the seeded anchor perturbation (mm)
  std::optional<Eigen::Vector3d> target_center;  ///< arm frame (mm), before any base move
  std::optional<double> fixer_grasp_error;   ///< mm
  std::optional<double> gripper_grasp_error;  ///< mm
  std::string message;
};

/// Base translations the planner tries before giving up.
inline constexpr std::size_t kMaxBaseCandidates = 64;

/// Executes the harvest sequence one phase tick at a time.
class HarvestMachine {
 public:
  /// Builds the workspace grid from the scenario when `grid` is null.
  explicit HarvestMachine(ScenarioSpec spec, std::shared_ptr<const WorkspaceGrid> grid = nullptr);

  const ScenarioSpec& spec() const { return spec_; }
  const WorkspaceGrid& grid() const { return *grid_; }

  /// @throws StateMachineError when stepping a terminal state.
  /// @throws DomainError for dt <= 0.
  std::pair<HarvestState, SimWorld> step(const HarvestState& state, const SimWorld& world, double dt) const;

  /// Runs from Home until Done or Failed.
  HarvestReport run(SimWorld world, const Eigen::Vector3d& peduncle_offset = Eigen::Vector3d::Zero()) const;

 private:
  /// IK and trajectories for staging targets shifted by a base move.
  HarvestPlan plan_motion(const StagingPair& staging, const BaseAdjustment& base) const;

  ScenarioSpec spec_;
  ArmModeld gripper_;
  ArmModeld fixer_;
  std::shared_ptr<const WorkspaceGrid> grid_;
};

HarvestReport simulate_harvest(const ScenarioSpec& spec, std::shared_ptr<const WorkspaceGrid> grid = nullptr);

}  // namespace avo
