#include "avoharvest/harvest_sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include <fmt/format.h>

namespace avo {

namespace {

constexpr std::array<std::string_view, 13> kPhaseNames = {
    "Home", "Perceive", "Plan", "FixerStage", "FixerGrasp", "Dwell", "GripperStage",
    "FingerClose", "WristRotate", "Retrieve", "ReturnHome", "Done", "Failed",
};

constexpr std::array<std::string_view, 4> kOutcomeNames = {"success", "fixer_fail", "gripper_fail",
                                                            "plan_fail"};

// Top 53 bits of the raw draw, so the value does not depend on the library's
// distribution implementation.
double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Voxel witnesses are reachable configurations next to the target; the best IK seed available.
JointVectord ik_seed(const WorkspaceGrid& grid, ArmId arm, const ArmModeld& model, const Eigen::Vector3d& p) {
  const auto& set = grid.reachable(arm);
  if (const auto idx = grid.geometry().voxel_index(p); idx && set.built && set.occupied[*idx]) {
    return set.witness[*idx];
  }
  return model.home();
}

bool terminal(HarvestPhase p) { return p == HarvestPhase::kDone || p == HarvestPhase::kFailed; }

const JointVectord& sample_trajectory(const JointTrajectory& traj, double t) {
  if (traj.waypoints.empty()) throw DomainError("empty trajectory");
  const double pos = traj.dt > 0.0 ? t / traj.dt + 1e-9 : 0.0;
  const auto last = traj.waypoints.size() - 1;
  const auto idx = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(pos))), last);
  return traj.waypoints[idx];
}

JointTrajectory stationary(const JointVectord& q, double dt) {
  JointTrajectory t;
  t.waypoints.push_back(q);
  t.dt = dt;
  return t;
}

}  // namespace

void SimWorld::translate_base(const Eigen::Vector3d& t) {
  avocado_center -= t;
  peduncle_anchor -= t;
  for (auto& d : distractors) d -= t;
  base_translation += t;
}

std::pair<SimWorld, Eigen::Vector3d> make_world(const ScenarioSpec& spec) {
  const WorldParams& wp = spec.world;
  SimWorld w;
  w.avocado_center = wp.avocado_center;
  const Eigen::Vector3d axis = wp.avocado_axis.value_or(spec.extrinsics.rotation * Eigen::Vector3d::UnitZ());
  if (!(axis.norm() > 0.0)) throw DomainError("avocado axis must be non-zero");
  w.avocado_axis = axis.normalized();
  w.semi_axes = wp.semi_axes;
  w.distractors = wp.distractors;
  w.elasticity_windup = wp.elasticity_windup;
  w.detach_threshold = wp.detach_threshold;
  w.wrist_limit = wp.wrist_limit;
  w.gripper_joints = spec.gripper.home();
  w.fixer_joints = spec.fixer.home();

  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  if (wp.peduncle_noise < 0.0) throw DomainError("peduncle_noise must be >= 0");
  if (wp.peduncle_noise > 0.0) {
    std::mt19937_64 rng(spec.seed);
    const double z = 2.0 * unit_draw(rng) - 1.0;
    const double phi = 2.0 * std::numbers::pi * unit_draw(rng);
    const double mag = wp.peduncle_noise * unit_draw(rng);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    offset = mag * Eigen::Vector3d(r * std::cos(phi), r * std::sin(phi), z);
  }
  w.peduncle_anchor = w.avocado_center + kPeduncleOffset * w.avocado_axis + offset;
  return {w, offset};
}

std::string_view to_string(HarvestPhase phase) { return kPhaseNames[static_cast<std::size_t>(phase)]; }

HarvestPhase phase_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kPhaseNames.size(); ++i) {
    if (kPhaseNames[i] == name) return static_cast<HarvestPhase>(i);
  }
  throw ParseError(fmt::format("unknown harvest phase '{}'", name));
}

std::string_view to_string(Outcome outcome) { return kOutcomeNames[static_cast<std::size_t>(outcome)]; }

Outcome outcome_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kOutcomeNames.size(); ++i) {
    if (kOutcomeNames[i] == name) return static_cast<Outcome>(i);
  }
  throw ParseError(fmt::format("unknown outcome '{}'", name));
}

bool is_legal_transition(HarvestPhase from, HarvestPhase to) {
  if (terminal(from)) return false;
  if (to == HarvestPhase::kFailed) {
    return from == HarvestPhase::kPlan || from == HarvestPhase::kFixerGrasp ||
           from == HarvestPhase::kFingerClose || from == HarvestPhase::kWristRotate;
  }
  return static_cast<int>(to) == static_cast<int>(from) + 1;
}

std::optional<double> detach_requirement(const SimWorld& world) {
  const double need = world.fixer_engaged ? world.detach_threshold
                                          : world.detach_threshold + world.elasticity_windup;
  if (need > world.wrist_limit) return std::nullopt;
  return need;
}

bool detach_rule(const SimWorld& world, double wrist_angle) {
  const auto need = detach_requirement(world);
  return need && wrist_angle >= *need;
}

HarvestMachine::HarvestMachine(ScenarioSpec spec, std::shared_ptr<const WorkspaceGrid> grid)
    : spec_(std::move(spec)), gripper_(spec_.gripper), fixer_(spec_.fixer), grid_(std::move(grid)) {
  if (!grid_) {
    grid_ = std::make_shared<const WorkspaceGrid>(build_workspace(
        gripper_, fixer_, spec_.workspace.steps_per_joint, spec_.chassis, spec_.workspace.geometry));
  }
}

HarvestPlan HarvestMachine::plan_motion(const StagingPair& staging, const BaseAdjustment& base) const {
  HarvestPlan plan;
  plan.staging = staging;
  plan.base = base;
  plan.staging.gripper_target.position -= base.translation;
  plan.staging.fixer_target.position -= base.translation;

  IkOptions ik = spec_.planner.ik_options();
  ik.constraint = OrientationConstraint::kNone;
  const TrajectoryOptions topt = spec_.planner.trajectory_options();
  const Eigen::Vector3d& pg = plan.staging.gripper_target.position;
  plan.gripper_goal = solve_ik(gripper_, plan.staging.gripper_target, ik_seed(*grid_, ArmId::kGripper, gripper_, pg), ik).joints;
  plan.gripper_approach = plan_trajectory(gripper_, gripper_.home(), plan.gripper_goal, spec_.chassis, topt);
  plan.gripper_return = plan_trajectory(gripper_, plan.gripper_goal, gripper_.home(), spec_.chassis, topt);
  if (spec_.sim.fixer_enabled) {
    const Eigen::Vector3d& pf = plan.staging.fixer_target.position;
    plan.fixer_goal = solve_ik(fixer_, plan.staging.fixer_target, ik_seed(*grid_, ArmId::kFixer, fixer_, pf), ik).joints;
    plan.fixer_approach = plan_trajectory(fixer_, fixer_.home(), plan.fixer_goal, spec_.chassis, topt);
    plan.fixer_return = plan_trajectory(fixer_, plan.fixer_goal, fixer_.home(), spec_.chassis, topt);
  } else {
    plan.fixer_goal = fixer_.home();
    plan.fixer_approach = stationary(fixer_.home(), topt.dt);
    plan.fixer_return = stationary(fixer_.home(), topt.dt);
  }
  return plan;
}

std::pair<HarvestState, SimWorld> HarvestMachine::step(const HarvestState& state, const SimWorld& world,
                                                        double dt) const {
  if (!(dt > 0.0)) throw DomainError("step needs dt > 0");
  if (terminal(state.phase)) {
    throw StateMachineError(fmt::format("cannot step terminal phase {}", to_string(state.phase)));
  }
  HarvestState s = state;
  SimWorld w = world;
  const SimParams& sim = spec_.sim;

  auto advance = [&](HarvestPhase next) {
    if (!is_legal_transition(s.phase, next)) {
      throw StateMachineError(fmt::format("illegal transition {} -> {}", to_string(s.phase), to_string(next)));
    }
    s.phase = next;
    s.elapsed = 0.0;
  };
  auto fail = [&](Outcome o, std::string msg) {
    advance(HarvestPhase::kFailed);
    s.failure = o;
    s.message = std::move(msg);
  };
  // Consumes up to dt of a phase lasting `duration`; true once it is over.
  auto timed = [&](double duration) {
    const double consume = std::min(dt, std::max(duration - s.elapsed, 0.0));
    s.elapsed += consume;
    s.clock += consume;
    if (s.elapsed >= duration - 1e-12) {
      s.clock += duration - s.elapsed;
      s.elapsed = duration;
      return true;
    }
    return false;
  };

  switch (s.phase) {
    case HarvestPhase::kHome:
      w.gripper_joints = gripper_.home();
      w.fixer_joints = fixer_.home();
      advance(HarvestPhase::kPerceive);
      break;

    case HarvestPhase::kPerceive:
      s.target.reset();
      try {
        const SyntheticScene scene = render_synthetic_scene(w, spec_.camera, spec_.extrinsics);
        const auto estimates =
            estimate_poses(scene.detections, scene.depth, spec_.camera, spec_.extrinsics, spec_.perception);
        if (estimates.empty()) {
          s.message = "no avocado detected";
        } else {
          s.target = select_target(estimates);
        }
      } catch (const std::exception& e) {
        s.message = e.what();
      }
      advance(HarvestPhase::kPlan);
      break;

    case HarvestPhase::kPlan: {
      if (!s.target) {
        fail(Outcome::kPlanFail, "no target: " + s.message);
        break;
      }
      const StagingPair staging = staging_poses(*s.target);
      std::vector<BaseAdjustment> candidates;
      if (task_feasible(staging.gripper_target.position, staging.fixer_target.position, *grid_)) {
        candidates.push_back(BaseAdjustment{});
      } else if (!sim.repositioning_enabled) {
        fail(Outcome::kPlanFail, "targets outside the task-feasible workspace");
        break;
      } else {
        candidates = reposition_candidates(staging, *grid_, spec_.planner.reposition, kMaxBaseCandidates);
        if (candidates.empty()) {
          fail(Outcome::kPlanFail, fmt::format("no base translation within +/-{:.0f} mm makes both targets feasible",
                                               spec_.planner.reposition.lattice_bound));
          break;
        }
      }

      // Occupancy is sampled, so a feasible voxel can still miss IK; fall through
      // to the next translation in lattice order.
      std::optional<HarvestPlan> found;
      std::string last_error;
      for (const auto& base : candidates) {
        try {
          found = plan_motion(staging, base);
          break;
        } catch (const std::exception& e) {
          last_error = e.what();
        }
      }
      if (!found) {
        fail(Outcome::kPlanFail, last_error);
        break;
      }
      HarvestPlan plan = std::move(*found);
      w.translate_base(plan.base.translation);
      s.plan = std::move(plan);
      advance(HarvestPhase::kFixerStage);
      break;
    }

    case HarvestPhase::kFixerStage: {
      const auto& traj = s.plan->fixer_approach;
      const bool done = timed(traj.duration());
      w.fixer_joints = sample_trajectory(traj, s.elapsed);
      if (done) advance(HarvestPhase::kFixerGrasp);
      break;
    }

    case HarvestPhase::kFixerGrasp: {
      if (!sim.fixer_enabled) {
        w.fixer_engaged = false;
        advance(HarvestPhase::kDwell);
        break;
      }
      const double err = (forward_kinematics(fixer_, w.fixer_joints).position - w.peduncle_anchor).norm();
      if (err <= sim.grasp_radius) {
        w.fixer_engaged = true;
        advance(HarvestPhase::kDwell);
      } else {
        fail(Outcome::kFixerFail, fmt::format("fixer missed the peduncle by {:.3f} mm", err));
      }
      break;
    }

    case HarvestPhase::kDwell:
      if (timed(sim.dwell)) advance(HarvestPhase::kGripperStage);
      break;

    case HarvestPhase::kGripperStage: {
      const auto& traj = s.plan->gripper_approach;
      const bool done = timed(traj.duration());
      w.gripper_joints = sample_trajectory(traj, s.elapsed);
      if (done) advance(HarvestPhase::kFingerClose);
      break;
    }

    case HarvestPhase::kFingerClose:
      if (timed(sim.finger_close_duration)) {
        const double err = (forward_kinematics(gripper_, w.gripper_joints).position - w.avocado_center).norm();
        if (err <= sim.grasp_radius) {
          advance(HarvestPhase::kWristRotate);
        } else {
          fail(Outcome::kGripperFail, fmt::format("gripper missed the avocado by {:.3f} mm", err));
        }
      }
      break;

    case HarvestPhase::kWristRotate: {
      if (!(sim.wrist_rate > 0.0)) throw DomainError("wrist_rate must be positive");
      const auto need = detach_requirement(w);
      const double goal = need ? *need : w.wrist_limit;
      const double remaining = std::max(goal - s.wrist_angle, 0.0) / sim.wrist_rate;
      if (dt >= remaining) {
        s.wrist_angle = std::max(goal, s.wrist_angle);
        s.elapsed += remaining;
        s.clock += remaining;
      } else {
        s.wrist_angle += sim.wrist_rate * dt;
        s.elapsed += dt;
        s.clock += dt;
      }
      if (detach_rule(w, s.wrist_angle)) {
        w.attached = false;
        advance(HarvestPhase::kRetrieve);
      } else if (s.wrist_angle >= w.wrist_limit) {
        fail(Outcome::kGripperFail, "wrist limit reached before the peduncle detached");
      }
      break;
    }

    case HarvestPhase::kRetrieve:
      if (w.attached) throw StateMachineError("retrieve with the avocado still attached");
      w.fixer_engaged = false;
      advance(HarvestPhase::kReturnHome);
      break;

    case HarvestPhase::kReturnHome: {
      // Gripper carries the fruit home first, then the fixer releases and follows.
      const auto& g = s.plan->gripper_return;
      const auto& f = s.plan->fixer_return;
      const double tg = g.duration();
      const bool done = timed(tg + f.duration());
      if (s.elapsed <= tg) {
        w.gripper_joints = sample_trajectory(g, s.elapsed);
      } else {
        w.gripper_joints = g.waypoints.back();
        w.fixer_joints = sample_trajectory(f, s.elapsed - tg);
      }
      if (done) {
        w.gripper_joints = g.waypoints.back();
        w.fixer_joints = f.waypoints.back();
        advance(HarvestPhase::kDone);
      }
      break;
    }

    case HarvestPhase::kDone:
    case HarvestPhase::kFailed:
      break;
  }
  return {s, w};
}

HarvestReport HarvestMachine::run(SimWorld world, const Eigen::Vector3d& peduncle_offset) const {
  HarvestReport report;
  report.peduncle_offset = peduncle_offset.norm();
  HarvestState state;
  report.timeline.push_back({state.phase, 0.0});
  constexpr long kMaxTicks = 10'000'000;
  long ticks = 0;
  while (!terminal(state.phase)) {
    if (++ticks > kMaxTicks) throw StateMachineError("harvest did not terminate");
    const HarvestPhase before = state.phase;
    auto [next, w] = step(state, world, spec_.sim.dt);
    if (before == HarvestPhase::kPerceive && next.target) report.target_center = next.target->center * 1000.0;
    if (before == HarvestPhase::kFixerGrasp && spec_.sim.fixer_enabled) {
      report.fixer_grasp_error = (forward_kinematics(fixer_, w.fixer_joints).position - w.peduncle_anchor).norm();
    }
    if (before == HarvestPhase::kFingerClose && next.phase != before) {
      report.gripper_grasp_error =
          (forward_kinematics(gripper_, w.gripper_joints).position - w.avocado_center).norm();
    }
    if (next.phase != before) report.timeline.push_back({next.phase, next.clock});
    state = std::move(next);
    world = std::move(w);
  }
  report.outcome = state.phase == HarvestPhase::kDone ? Outcome::kSuccess : *state.failure;
  report.wrist_rotation_used = state.wrist_angle;
  report.detached = !world.attached;
  report.base_translation = world.base_translation;
  report.message = state.phase == HarvestPhase::kDone ? std::string() : state.message;
  return report;
}

HarvestReport simulate_harvest(const ScenarioSpec& spec, std::shared_ptr<const WorkspaceGrid> grid) {
  auto [world, offset] = make_world(spec);
  HarvestMachine machine(spec, std::move(grid));
  return machine.run(std::move(world), offset);
}

}  // namespace avo
