#include "avoharvest/planner.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <tuple>

namespace avo {

StagingPair staging_poses(const AvocadoEstimate& target) {
  if (target.frame != Frame::kArm) throw DomainError("staging poses need an arm-frame estimate");
  StagingPair pair;
  pair.approach_axis = target.rotation.col(2).normalized();
  const Eigen::Vector3d center_mm = target.center * 1000.0;
  // End-effector z anti-parallel to the approach axis: rotate the avocado frame by pi about x.
  const Eigen::Matrix3d ee = target.rotation * Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal();
  pair.gripper_target = Posed{center_mm, ee};
  pair.fixer_target = Posed{center_mm + kPeduncleOffset * pair.approach_axis, ee};
  return pair;
}

OrientationConstraint default_orientation_constraint(ArmId arm) {
  return arm == ArmId::kGripper ? OrientationConstraint::kApproachAxis : OrientationConstraint::kFull;
}

namespace {

struct Residual {
  Eigen::VectorXd error;  // stacked, weighted
  double position_error = 0.0;
  double orientation_error = 0.0;
};

Eigen::Vector3d rotation_vector(const Eigen::Matrix3d& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

class IkProblem {
 public:
  IkProblem(const ArmModeld& arm, const Posed& target, OrientationConstraint constraint, double weight)
      : arm_(arm), target_(target), constraint_(constraint), weight_(weight) {}

  int rows() const {
    return constraint_ == OrientationConstraint::kNone ? 3 : 6;
  }

  Residual residual(const JointVectord& q) const {
    const Posed pose = forward_kinematics(arm_, q);
    Residual r;
    r.error.resize(rows());
    const Eigen::Vector3d dp = target_.position - pose.position;
    r.error.head<3>() = dp;
    r.position_error = dp.norm();
    if (constraint_ == OrientationConstraint::kFull) {
      const Eigen::Vector3d w = rotation_vector(target_.rotation * pose.rotation.transpose());
      r.orientation_error = w.norm();
      r.error.tail<3>() = weight_ * w;
    } else if (constraint_ == OrientationConstraint::kApproachAxis) {
      const Eigen::Vector3d zc = pose.rotation.col(2);
      const Eigen::Vector3d zt = target_.rotation.col(2);
      const Eigen::Vector3d cross = zc.cross(zt);
      const double angle = std::atan2(cross.norm(), zc.dot(zt));
      const Eigen::Vector3d w = cross.norm() > 1e-15 ? Eigen::Vector3d(cross.normalized() * angle)
                                                      : Eigen::Vector3d::Zero();
      r.orientation_error = angle;
      r.error.tail<3>() = weight_ * w;
    }
    return r;
  }

  Eigen::MatrixXd jacobian(const JointVectord& q) const {
    const Jacobian<double> full = analytic_jacobian(arm_, q);
    Eigen::MatrixXd j(rows(), arm_.dof());
    j.topRows<3>() = full.topRows<3>();
    if (constraint_ == OrientationConstraint::kFull) {
      j.bottomRows<3>() = weight_ * full.bottomRows<3>();
    } else if (constraint_ == OrientationConstraint::kApproachAxis) {
      // Spin about the current approach axis leaves it unchanged.
      const Eigen::Vector3d zc = forward_kinematics(arm_, q).rotation.col(2);
      const Eigen::Matrix3d proj = Eigen::Matrix3d::Identity() - zc * zc.transpose();
      j.bottomRows<3>() = weight_ * proj * full.bottomRows<3>();
    }
    return j;
  }

 private:
  const ArmModeld& arm_;
  const Posed& target_;
  OrientationConstraint constraint_;
  double weight_;
};

struct Attempt {
  JointVectord joints;
  Residual residual;
  int iterations = 0;
  bool converged = false;
};

Attempt run_dls(const ArmModeld& arm, const IkProblem& problem, const JointVectord& seed, const IkOptions& opt,
                int iteration_budget) {
  constexpr double kMaxJointStep = 0.5;
  Attempt best{seed, problem.residual(seed), 0, false};
  JointVectord q = seed;
  Residual res = best.residual;
  double cost = res.error.squaredNorm();
  double lambda = opt.damping;
  int it = 0;
  auto done = [&](const Residual& r) { return r.position_error <= opt.pos_tol && r.orientation_error <= opt.ori_tol; };

  while (!done(res) && it < iteration_budget) {
    ++it;
    const Eigen::MatrixXd j = problem.jacobian(q);
    const Eigen::MatrixXd normal =
        j.transpose() * j + lambda * lambda * Eigen::MatrixXd::Identity(arm.dof(), arm.dof());
    Eigen::VectorXd dq = normal.ldlt().solve(j.transpose() * res.error);
    const double step = dq.cwiseAbs().maxCoeff();
    if (step > kMaxJointStep) dq *= kMaxJointStep / step;
    const JointVectord candidate = arm.clamp(q + dq);
    const Residual cand_res = problem.residual(candidate);
    const double cand_cost = cand_res.error.squaredNorm();
    if (cand_cost < cost) {
      q = candidate;
      res = cand_res;
      cost = cand_cost;
      lambda = std::max(opt.damping, lambda * 0.5);
    } else {
      lambda *= 2.0;
      if (lambda > 1e9) break;
    }
  }
  best.joints = q;
  best.residual = res;
  best.iterations = it;
  best.converged = done(res);
  return best;
}

// Kronecker sequence over the joint box.
JointVectord restart_seed(const ArmModeld& arm, int r) {
  static constexpr double kIrrational[] = {0.6180339887498949, 0.4142135623730951, 0.7320508075688772,
                                           0.2360679774997898, 0.6457513110645907, 0.3166247903554};
  JointVectord q(arm.dof());
  for (int j = 0; j < arm.dof(); ++j) {
    const double u = std::fmod(0.5 + r * kIrrational[j % 6], 1.0);
    const auto& lim = arm.joint_limits()[static_cast<std::size_t>(j)];
    q[j] = lim.lower + u * (lim.upper - lim.lower);
  }
  return q;
}

}  // namespace

IkResult solve_ik(const ArmModeld& arm, const Posed& target, const JointVectord& seed, const IkOptions& options) {
  arm.check_dimension(seed);
  if (!arm.within_limits(seed)) throw DomainError("IK seed outside joint limits");

  const double reach = (target.position - arm.base_transform().translation()).norm();
  if (reach > arm.max_reach() + options.pos_tol) {
    throw IkError(IkError::Kind::kOutOfReach, reach - arm.max_reach(),
                  fmt::format("{} target {:.1f} mm from base exceeds reach {:.1f} mm", arm.name(), reach,
                              arm.max_reach()));
  }
  if (options.grid != nullptr && !options.grid->occupied(arm.id(), target.position)) {
    throw IkError(IkError::Kind::kOutOfReach, std::numeric_limits<double>::infinity(),
                  fmt::format("{} target outside the sampled workspace", arm.name()));
  }

  const IkProblem problem(arm, target, options.constraint.value_or(default_orientation_constraint(arm.id())),
                          options.orientation_weight);
  int budget = options.max_iterations;
  Attempt best = run_dls(arm, problem, seed, options, budget);
  int used = best.iterations;
  for (int r = 1; !best.converged && r <= options.restarts && used < options.max_iterations; ++r) {
    Attempt next = run_dls(arm, problem, restart_seed(arm, r), options, options.max_iterations - used);
    used += next.iterations;
    if (next.converged || next.residual.error.squaredNorm() < best.residual.error.squaredNorm()) best = next;
  }
  if (!best.converged) {
    throw IkError(IkError::Kind::kNoConvergence, best.residual.position_error,
                  fmt::format("{} IK did not converge: position error {:.3f} mm, orientation error {:.4f} rad",
                              arm.name(), best.residual.position_error, best.residual.orientation_error));
  }
  return IkResult{best.joints, best.residual.position_error, best.residual.orientation_error, used};
}

std::vector<JointVectord> interpolate(const JointVectord& start, const JointVectord& goal, double max_step) {
  if (start.size() != goal.size()) throw DimensionError("start and goal differ in length");
  if (!(max_step > 0.0)) throw DomainError("max_step must be positive");
  const double span = start.size() == 0 ? 0.0 : (goal - start).cwiseAbs().maxCoeff();
  const auto segments = static_cast<int>(std::ceil(span / max_step - 1e-12));
  std::vector<JointVectord> out;
  out.reserve(static_cast<std::size_t>(segments) + 1);
  out.push_back(start);
  for (int i = 1; i < segments; ++i) {
    out.push_back(start + (goal - start) * (static_cast<double>(i) / segments));
  }
  if (segments > 0) out.push_back(goal);
  return out;
}

namespace {

std::optional<std::size_t> first_collision(const ArmModeld& arm, const std::vector<JointVectord>& path,
                                           const ChassisBox& chassis) {
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (check_self_collision(arm, path[i], chassis)) return i;
  }
  return std::nullopt;
}

double path_clearance(const ArmModeld& arm, const std::vector<JointVectord>& path, const ChassisBox& chassis) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : path) best = std::min(best, chassis_clearance(arm, q, chassis));
  return best;
}

std::vector<JointVectord> via_path(const JointVectord& start, const JointVectord& via, const JointVectord& goal,
                                   double max_step) {
  auto path = interpolate(start, via, max_step);
  const auto tail = interpolate(via, goal, max_step);
  path.insert(path.end(), tail.begin() + 1, tail.end());
  return path;
}

}  // namespace

JointTrajectory plan_trajectory(const ArmModeld& arm, const JointVectord& start, const JointVectord& goal,
                                const ChassisBox& chassis, const TrajectoryOptions& options) {
  arm.check_dimension(start);
  arm.check_dimension(goal);
  if (!arm.within_limits(start) || !arm.within_limits(goal)) {
    throw DomainError("trajectory endpoints outside joint limits");
  }
  JointTrajectory traj;
  traj.dt = options.dt;
  traj.waypoints = interpolate(start, goal, options.max_step);
  const auto blocked = first_collision(arm, traj.waypoints, chassis);
  if (!blocked) return traj;

  if (check_self_collision(arm, start, chassis) || check_self_collision(arm, goal, chassis)) {
    throw PlanningError(fmt::format("{} trajectory endpoint collides with the chassis (waypoint {})", arm.name(),
                                    *blocked));
  }

  // Hill-climb a single via-point on path clearance.
  std::mt19937_64 rng(options.seed);
  auto objective = [&](const JointVectord& via) {
    return path_clearance(arm, via_path(start, via, goal, options.max_step), chassis);
  };
  constexpr std::array<double, 4> kSteps{0.4, 0.2, 0.1, 0.05};
  constexpr int kRestarts = 16;
  int budget = options.max_climb_iterations;
  for (int restart = 0; restart <= kRestarts && budget > 0; ++restart) {
    JointVectord via;
    if (restart == 0) {
      via = arm.clamp(0.5 * (start + goal));
    } else {
      via.resize(arm.dof());
      for (int j = 0; j < arm.dof(); ++j) {
        const auto& lim = arm.joint_limits()[static_cast<std::size_t>(j)];
        via[j] = lim.lower + std::uniform_real_distribution<double>(0.0, 1.0)(rng) * (lim.upper - lim.lower);
      }
    }
    double value = objective(via);
    std::size_t level = 0;
    while (value < 0.0 && level < kSteps.size() && budget-- > 0) {
      JointVectord best_via = via;
      double best_value = value;
      for (int j = 0; j < arm.dof(); ++j) {
        for (double sign : {1.0, -1.0}) {
          JointVectord cand = via;
          cand[j] += sign * kSteps[level];
          cand = arm.clamp(cand);
          const double v = objective(cand);
          if (v > best_value) {
            best_value = v;
            best_via = cand;
          }
        }
      }
      if (best_value > value) {
        via = best_via;
        value = best_value;
      } else {
        ++level;
      }
    }
    if (value >= 0.0) {
      auto path = via_path(start, via, goal, options.max_step);
      if (!first_collision(arm, path, chassis)) {
        traj.waypoints = std::move(path);
        return traj;
      }
    }
  }
  const JointVectord& q = traj.waypoints[*blocked];
  throw PlanningError(fmt::format("{} trajectory blocked: first colliding waypoint {} at [{:.4f}]", arm.name(),
                                  *blocked, fmt::join(q.data(), q.data() + q.size(), ", ")));
}

std::vector<BaseAdjustment> reposition_candidates(const StagingPair& pair, const WorkspaceGrid& grid,
                                                  const RepositionOptions& options, std::size_t limit) {
  const Eigen::Vector3d avocado = pair.gripper_target.position;
  const Eigen::Vector3d peduncle = pair.fixer_target.position;
  if (task_feasible(avocado, peduncle, grid)) return {BaseAdjustment{}};
  if (!(options.lattice_step > 0.0)) throw DomainError("lattice step must be positive");

  const int n = static_cast<int>(std::floor(options.lattice_bound / options.lattice_step + 1e-9));
  std::vector<std::array<int, 3>> lattice;
  lattice.reserve(static_cast<std::size_t>((2 * n + 1) * (2 * n + 1) * (2 * n + 1)));
  for (int i = -n; i <= n; ++i)
    for (int j = -n; j <= n; ++j)
      for (int k = -n; k <= n; ++k) lattice.push_back({i, j, k});
  std::sort(lattice.begin(), lattice.end(), [](const auto& a, const auto& b) {
    const int na = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
    const int nb = b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
    return std::tie(na, a) < std::tie(nb, b);
  });
  std::vector<BaseAdjustment> out;
  for (const auto& c : lattice) {
    if (out.size() >= limit) break;
    const Eigen::Vector3d t = options.lattice_step * Eigen::Vector3d(c[0], c[1], c[2]);
    if (task_feasible(avocado - t, peduncle - t, grid)) out.push_back({t, true});
  }
  return out;
}

BaseAdjustment base_reposition(const StagingPair& pair, const WorkspaceGrid& grid, const RepositionOptions& options) {
  const auto found = reposition_candidates(pair, grid, options, 1);
  if (found.empty()) {
    throw PlanningError(fmt::format("no base translation within +/-{:.0f} mm makes both targets feasible",
                                    options.lattice_bound));
  }
  return found.front();
}

}  // namespace avo
