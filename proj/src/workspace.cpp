#include "avoharvest/workspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace avo {

namespace {

constexpr std::uint64_t kNoWitness = std::numeric_limits<std::uint64_t>::max();

std::uint64_t ipow(std::uint64_t base, int exp) {
  std::uint64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

// Joint 0 is the most significant digit.
JointVectord decode_sample(const ArmModeld& arm, std::uint64_t index, int steps) {
  JointVectord q(arm.dof());
  for (int j = arm.dof() - 1; j >= 0; --j) {
    const auto digit = static_cast<int>(index % static_cast<std::uint64_t>(steps));
    index /= static_cast<std::uint64_t>(steps);
    q[j] = sample_angle(arm.joint_limits()[static_cast<std::size_t>(j)], digit, steps);
  }
  return q;
}

}  // namespace

std::optional<std::size_t> GridGeometry::voxel_index(const Eigen::Vector3d& p) const {
  std::array<long, 3> idx{};
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor((p[a] - origin[a]) / voxel_size);
    if (!(f >= 0.0) || f >= static_cast<double>(dims[static_cast<std::size_t>(a)])) return std::nullopt;
    idx[static_cast<std::size_t>(a)] = static_cast<long>(f);
  }
  return static_cast<std::size_t>(idx[0] + dims[0] * (idx[1] + static_cast<long>(dims[1]) * idx[2]));
}

Eigen::Vector3d GridGeometry::voxel_center(std::size_t index) const {
  const auto nx = static_cast<std::size_t>(dims[0]);
  const auto ny = static_cast<std::size_t>(dims[1]);
  const Eigen::Vector3d cell(static_cast<double>(index % nx), static_cast<double>((index / nx) % ny),
                             static_cast<double>(index / (nx * ny)));
  return origin + (cell.array() + 0.5).matrix() * voxel_size;
}

std::size_t ReachableSet::occupied_count() const {
  return static_cast<std::size_t>(std::count(occupied.begin(), occupied.end(), std::uint8_t{1}));
}

bool ReachableSet::operator==(const ReachableSet& other) const {
  if (built != other.built || steps_per_joint != other.steps_per_joint || evaluated != other.evaluated ||
      colliding != other.colliding || occupied != other.occupied || witness.size() != other.witness.size()) {
    return false;
  }
  for (std::size_t i = 0; i < witness.size(); ++i) {
    if (witness[i].size() != other.witness[i].size()) return false;
    if (witness[i].size() != 0 && witness[i] != other.witness[i]) return false;
  }
  return true;
}

WorkspaceGrid::WorkspaceGrid(GridGeometry geometry) : geometry_(std::move(geometry)) {
  if (!(geometry_.voxel_size > 0.0)) throw DomainError("voxel_size must be positive");
  for (int d : geometry_.dims) {
    if (d <= 0) throw DomainError("grid dims must be positive");
  }
}

bool WorkspaceGrid::occupied(ArmId arm, const Eigen::Vector3d& p) const {
  const auto& set = reachable(arm);
  if (!set.built) return false;
  const auto idx = geometry_.voxel_index(p);
  return idx && set.occupied[*idx] != 0;
}

std::vector<Eigen::Vector3d> link_sample_points(const ArmModeld& arm, const JointVectord& q,
                                                int samples_per_segment) {
  const auto frames = frame_chain(arm, q);
  std::vector<Eigen::Vector3d> points;
  points.reserve(static_cast<std::size_t>(arm.dof() * samples_per_segment));
  const int n = std::max(samples_per_segment, 2);
  for (std::size_t s = 0; s + 1 < frames.size(); ++s) {
    const Eigen::Vector3d a = frames[s].translation();
    const Eigen::Vector3d b = frames[s + 1].translation();
    for (int k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(n - 1);
      points.push_back(a + t * (b - a));
    }
  }
  return points;
}

bool check_self_collision(const ArmModeld& arm, const JointVectord& q, const ChassisBox& chassis) {
  if (!arm.within_limits(q)) {
    throw DomainError(std::string(arm.name()) + " joints outside limits");
  }
  const auto points = link_sample_points(arm, q);
  return std::any_of(points.begin(), points.end(), [&](const auto& p) { return chassis.contains(p); });
}

double chassis_clearance(const ArmModeld& arm, const JointVectord& q, const ChassisBox& chassis) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : link_sample_points(arm, q)) best = std::min(best, chassis.signed_distance(p));
  return best;
}

double sample_angle(const JointLimit<double>& limit, int i, int steps) {
  if (i == steps - 1) return limit.upper;
  return limit.lower + (limit.upper - limit.lower) * static_cast<double>(i) / static_cast<double>(steps - 1);
}

void sample_reachable(WorkspaceGrid& grid, const ArmModeld& arm, int steps_per_joint, const ChassisBox& chassis,
                      int workers) {
  if (steps_per_joint < 2) throw DomainError("steps_per_joint must be >= 2");
  const GridGeometry& geom = grid.geometry();
  const std::size_t nvox = geom.voxel_count();
  const std::uint64_t total = ipow(static_cast<std::uint64_t>(steps_per_joint), arm.dof());

  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = static_cast<int>(std::min<std::uint64_t>(static_cast<std::uint64_t>(workers), total));

  struct Partial {
    std::vector<std::uint64_t> best;
    std::uint64_t evaluated = 0;
    std::uint64_t colliding = 0;
  };
  std::vector<Partial> partials(static_cast<std::size_t>(workers));

  auto sweep = [&](int w) {
    Partial& part = partials[static_cast<std::size_t>(w)];
    part.best.assign(nvox, kNoWitness);
    const std::uint64_t begin = total * static_cast<std::uint64_t>(w) / static_cast<std::uint64_t>(workers);
    const std::uint64_t end = total * static_cast<std::uint64_t>(w + 1) / static_cast<std::uint64_t>(workers);
    for (std::uint64_t s = begin; s < end; ++s) {
      const JointVectord q = decode_sample(arm, s, steps_per_joint);
      ++part.evaluated;
      const auto points = link_sample_points(arm, q);
      if (std::any_of(points.begin(), points.end(), [&](const auto& p) { return chassis.contains(p); })) {
        ++part.colliding;
        continue;
      }
      if (const auto idx = geom.voxel_index(points.back())) {
        part.best[*idx] = std::min(part.best[*idx], s);
      }
    }
  };

  if (workers == 1) {
    sweep(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) threads.emplace_back(sweep, w);
    for (auto& t : threads) t.join();
  }

  ReachableSet& set = grid.reachable(arm.id());
  set = ReachableSet{};
  set.built = true;
  set.steps_per_joint = steps_per_joint;
  set.occupied.assign(nvox, 0);
  set.witness.assign(nvox, JointVectord());
  std::vector<std::uint64_t> best(nvox, kNoWitness);
  for (const auto& part : partials) {
    set.evaluated += part.evaluated;
    set.colliding += part.colliding;
    for (std::size_t v = 0; v < nvox; ++v) best[v] = std::min(best[v], part.best[v]);
  }
  for (std::size_t v = 0; v < nvox; ++v) {
    if (best[v] == kNoWitness) continue;
    set.occupied[v] = 1;
    set.witness[v] = decode_sample(arm, best[v], steps_per_joint);
  }
}

WorkspaceGrid sample_reachable(const ArmModeld& arm, int steps_per_joint, const ChassisBox& chassis,
                               const GridGeometry& geometry, int workers) {
  WorkspaceGrid grid(geometry);
  sample_reachable(grid, arm, steps_per_joint, chassis, workers);
  return grid;
}

WorkspaceGrid build_workspace(const ArmModeld& gripper, const ArmModeld& fixer, int steps_per_joint,
                              const ChassisBox& chassis, const GridGeometry& geometry, int workers) {
  WorkspaceGrid grid(geometry);
  sample_reachable(grid, gripper, steps_per_joint, chassis, workers);
  sample_reachable(grid, fixer, steps_per_joint, chassis, workers);
  return grid;
}

bool task_feasible(const Eigen::Vector3d& avocado_pos, const Eigen::Vector3d& peduncle_pos,
                   const WorkspaceGrid& grid) {
  if (!grid.has_arm(ArmId::kGripper) || !grid.has_arm(ArmId::kFixer)) {
    throw DomainError("task feasibility needs a grid built for both arms");
  }
  auto in_both = [&](const Eigen::Vector3d& p) {
    return grid.occupied(ArmId::kGripper, p) && grid.occupied(ArmId::kFixer, p);
  };
  return in_both(avocado_pos) && in_both(peduncle_pos);
}

std::vector<std::size_t> verify_witnesses(const WorkspaceGrid& grid, ArmId arm, const ArmModeld& model) {
  std::vector<std::size_t> bad;
  const auto& set = grid.reachable(arm);
  for (std::size_t v = 0; v < set.occupied.size(); ++v) {
    if (!set.occupied[v]) continue;
    const auto& q = set.witness[v];
    if (q.size() != model.dof() || !model.within_limits(q)) {
      bad.push_back(v);
      continue;
    }
    const auto idx = grid.geometry().voxel_index(forward_kinematics(model, q).position);
    if (!idx || *idx != v) bad.push_back(v);
  }
  return bad;
}

}  // namespace avo
