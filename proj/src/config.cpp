#include "avoharvest/config.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace avo {

Eigen::Vector3d default_avocado_center() {
  return camera_to_arm(Eigen::Vector3d(0.0, 0.0, 0.4), ExtrinsicCalibration{}) * 1000.0;
}

IkOptions PlannerParams::ik_options() const {
  IkOptions o;
  o.pos_tol = pos_tol;
  o.ori_tol = ori_tol;
  o.damping = damping;
  o.max_iterations = max_iterations;
  return o;
}

TrajectoryOptions PlannerParams::trajectory_options() const {
  TrajectoryOptions o;
  o.max_step = max_step;
  o.dt = trajectory_dt;
  return o;
}

namespace {

std::string line_of(const YAML::Node& n) {
  return n.Mark().is_null() ? std::string{} : "line " + std::to_string(n.Mark().line + 1);
}

void check_keys(const YAML::Node& map, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!map.IsMap()) throw ParseError("section '" + section + "' must be a mapping", line_of(map));
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) throw ParseError("unknown key '" + key + "' in " + section, line_of(kv.first));
  }
}

template <typename T>
T scalar(const YAML::Node& n, const std::string& what) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ParseError("bad value for '" + what + "'", line_of(n));
  }
}

template <typename T>
void read(const YAML::Node& map, const char* key, T& out) {
  if (const auto n = map[key]) out = scalar<T>(n, key);
}

Eigen::Vector3d vec3(const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence() || n.size() != 3) throw ParseError("'" + what + "' must be a 3-element list", line_of(n));
  return {scalar<double>(n[0], what), scalar<double>(n[1], what), scalar<double>(n[2], what)};
}

void read_vec3(const YAML::Node& map, const char* key, Eigen::Vector3d& out) {
  if (const auto n = map[key]) out = vec3(n, key);
}

ArmModeld read_arm(const YAML::Node& n, const ArmModeld& fallback) {
  const std::string section = std::string("arms.") + std::string(fallback.name());
  check_keys(n, section, {"base_offset_z", "rows", "joint_limits"});
  double base = fallback.base_offset_z();
  read(n, "base_offset_z", base);
  auto rows = fallback.rows();
  if (const auto r = n["rows"]) {
    if (!r.IsSequence()) throw ParseError(section + ".rows must be a list", line_of(r));
    rows.clear();
    for (const auto& row : r) {
      if (!row.IsSequence() || (row.size() != 3 && row.size() != 4)) {
        throw ParseError(section + " DH row must be [a, d, alpha] or [a, d, alpha, theta_offset]", line_of(row));
      }
      DHRow<double> dh{scalar<double>(row[0], "a"), scalar<double>(row[1], "d"), scalar<double>(row[2], "alpha"),
                       row.size() == 4 ? scalar<double>(row[3], "theta_offset") : 0.0};
      if (dh.a < 0.0) throw ParseError(section + " DH row with negative link length", line_of(row));
      rows.push_back(dh);
    }
  }
  auto limits = fallback.joint_limits();
  if (const auto l = n["joint_limits"]) {
    if (!l.IsSequence()) throw ParseError(section + ".joint_limits must be a list", line_of(l));
    limits.clear();
    for (const auto& lim : l) {
      if (!lim.IsSequence() || lim.size() != 2) throw ParseError(section + " joint limit must be [lower, upper]", line_of(lim));
      limits.push_back({scalar<double>(lim[0], "lower"), scalar<double>(lim[1], "upper")});
    }
  } else if (limits.size() != rows.size()) {
    limits.assign(rows.size(), JointLimit<double>{});
  }
  try {
    return ArmModeld(fallback.id(), rows, base, limits);
  } catch (const std::exception& e) {
    throw ParseError(section + ": " + e.what(), line_of(n));
  }
}

ScenarioSpec from_yaml(const YAML::Node& root) {
  if (!root.IsMap()) throw ParseError("scenario must be a mapping", line_of(root));
  check_keys(root, "scenario", {"schema_version", "seed", "arms", "chassis", "camera", "extrinsics", "workspace",
                                "perception", "planner", "world", "sim"});
  ScenarioSpec s;
  if (!root["schema_version"]) throw ParseError("missing schema_version");
  s.schema_version = scalar<int>(root["schema_version"], "schema_version");
  if (s.schema_version != kSchemaVersion) {
    throw ParseError("unsupported schema_version " + std::to_string(s.schema_version), line_of(root["schema_version"]));
  }
  read(root, "seed", s.seed);

  if (const auto arms = root["arms"]) {
    check_keys(arms, "arms", {"gripper", "fixer"});
    if (arms["gripper"]) s.gripper = read_arm(arms["gripper"], s.gripper);
    if (arms["fixer"]) s.fixer = read_arm(arms["fixer"], s.fixer);
  }
  if (const auto c = root["chassis"]) {
    check_keys(c, "chassis", {"center", "half_extents"});
    read_vec3(c, "center", s.chassis.center);
    read_vec3(c, "half_extents", s.chassis.half_extents);
    if ((s.chassis.half_extents.array() < 0.0).any()) throw ParseError("chassis half_extents must be >= 0", line_of(c));
  }
  if (const auto c = root["camera"]) {
    check_keys(c, "camera", {"fx", "fy", "cx", "cy", "width", "height"});
    read(c, "fx", s.camera.fx);
    read(c, "fy", s.camera.fy);
    read(c, "cx", s.camera.cx);
    read(c, "cy", s.camera.cy);
    read(c, "width", s.camera.width);
    read(c, "height", s.camera.height);
    try {
      s.camera.validate();
    } catch (const std::exception& e) {
      throw ParseError(std::string("camera: ") + e.what(), line_of(c));
    }
  }
  if (const auto e = root["extrinsics"]) {
    check_keys(e, "extrinsics", {"v_arm", "rotation"});
    read_vec3(e, "v_arm", s.extrinsics.v_arm);
    if (const auto r = e["rotation"]) {
      if (!r.IsSequence() || r.size() != 3) throw ParseError("extrinsics.rotation must be 3 rows", line_of(r));
      for (int i = 0; i < 3; ++i) s.extrinsics.rotation.row(i) = vec3(r[static_cast<std::size_t>(i)], "rotation").transpose();
      if (!is_rotation(s.extrinsics.rotation, 1e-9)) throw ParseError("extrinsics.rotation is not a rotation", line_of(r));
    }
  }
  if (const auto w = root["workspace"]) {
    check_keys(w, "workspace", {"steps_per_joint", "voxel_size", "origin", "dims"});
    read(w, "steps_per_joint", s.workspace.steps_per_joint);
    read(w, "voxel_size", s.workspace.geometry.voxel_size);
    read_vec3(w, "origin", s.workspace.geometry.origin);
    if (const auto d = w["dims"]) {
      if (!d.IsSequence() || d.size() != 3) throw ParseError("workspace.dims must be 3 integers", line_of(d));
      for (std::size_t i = 0; i < 3; ++i) s.workspace.geometry.dims[i] = scalar<int>(d[i], "dims");
    }
    if (s.workspace.steps_per_joint < 2 || !(s.workspace.geometry.voxel_size > 0.0)) {
      throw ParseError("workspace needs steps_per_joint >= 2 and voxel_size > 0", line_of(w));
    }
  }
  if (const auto p = root["perception"]) {
    check_keys(p, "perception", {"bin_width", "center_method"});
    read(p, "bin_width", s.perception.bin_width);
    if (const auto m = p["center_method"]) {
      const auto name = scalar<std::string>(m, "center_method");
      if (name == "centroid") s.perception.center_method = CenterMethod::kCentroid;
      else if (name == "quadric_fit") s.perception.center_method = CenterMethod::kQuadricFit;
      else throw ParseError("center_method must be centroid or quadric_fit", line_of(m));
    }
  }
  if (const auto p = root["planner"]) {
    check_keys(p, "planner", {"pos_tol", "ori_tol", "damping", "max_iterations", "max_step", "trajectory_dt",
                              "lattice_step", "lattice_bound"});
    read(p, "pos_tol", s.planner.pos_tol);
    read(p, "ori_tol", s.planner.ori_tol);
    read(p, "damping", s.planner.damping);
    read(p, "max_iterations", s.planner.max_iterations);
    read(p, "max_step", s.planner.max_step);
    read(p, "trajectory_dt", s.planner.trajectory_dt);
    read(p, "lattice_step", s.planner.reposition.lattice_step);
    read(p, "lattice_bound", s.planner.reposition.lattice_bound);
  }
  if (const auto w = root["world"]) {
    check_keys(w, "world", {"avocado_center", "avocado_axis", "semi_axes", "distractors", "elasticity_windup",
                            "detach_threshold", "wrist_limit", "peduncle_noise"});
    read_vec3(w, "avocado_center", s.world.avocado_center);
    if (const auto a = w["avocado_axis"]) {
      const Eigen::Vector3d axis = vec3(a, "avocado_axis");
      if (!(axis.norm() > 0.0)) throw ParseError("avocado_axis must be non-zero", line_of(a));
      s.world.avocado_axis = axis.normalized();
    }
    read_vec3(w, "semi_axes", s.world.semi_axes);
    if (const auto d = w["distractors"]) {
      if (!d.IsSequence()) throw ParseError("world.distractors must be a list", line_of(d));
      for (const auto& p : d) s.world.distractors.push_back(vec3(p, "distractors"));
    }
    read(w, "elasticity_windup", s.world.elasticity_windup);
    read(w, "detach_threshold", s.world.detach_threshold);
    read(w, "wrist_limit", s.world.wrist_limit);
    read(w, "peduncle_noise", s.world.peduncle_noise);
    if (!(s.world.detach_threshold < s.world.wrist_limit)) {
      throw ParseError("world.detach_threshold must be below wrist_limit", line_of(w));
    }
  }
  if (const auto m = root["sim"]) {
    check_keys(m, "sim", {"dt", "grasp_radius", "wrist_rate", "finger_close_duration", "dwell", "fixer_enabled",
                          "repositioning_enabled"});
    read(m, "dt", s.sim.dt);
    read(m, "grasp_radius", s.sim.grasp_radius);
    read(m, "wrist_rate", s.sim.wrist_rate);
    read(m, "finger_close_duration", s.sim.finger_close_duration);
    read(m, "dwell", s.sim.dwell);
    read(m, "fixer_enabled", s.sim.fixer_enabled);
    read(m, "repositioning_enabled", s.sim.repositioning_enabled);
    if (!(s.sim.dt > 0.0) || !(s.sim.wrist_rate > 0.0)) throw ParseError("sim.dt and sim.wrist_rate must be positive", line_of(m));
  }
  return s;
}

std::string list(const Eigen::Vector3d& v) { return fmt::format("[{}, {}, {}]", v[0], v[1], v[2]); }

void write_arm(std::ostream& os, const ArmModeld& arm) {
  fmt::print(os, "  {}:\n    base_offset_z: {}\n    rows:\n", arm.name(), arm.base_offset_z());
  for (const auto& r : arm.rows()) fmt::print(os, "      - [{}, {}, {}, {}]\n", r.a, r.d, r.alpha, r.theta_offset);
  fmt::print(os, "    joint_limits:\n");
  for (const auto& l : arm.joint_limits()) fmt::print(os, "      - [{}, {}]\n", l.lower, l.upper);
}

}  // namespace

ScenarioSpec parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(e.msg, "line " + std::to_string(e.mark.line + 1));
  }
  return from_yaml(root);
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file", path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(e.what(), path.string());
  }
}

void write_scenario(std::ostream& os, const ScenarioSpec& s) {
  fmt::print(os, "schema_version: {}\nseed: {}\narms:\n", s.schema_version, s.seed);
  write_arm(os, s.gripper);
  write_arm(os, s.fixer);
  fmt::print(os, "chassis:\n  center: {}\n  half_extents: {}\n", list(s.chassis.center), list(s.chassis.half_extents));
  fmt::print(os, "camera:\n  fx: {}\n  fy: {}\n  cx: {}\n  cy: {}\n  width: {}\n  height: {}\n", s.camera.fx,
             s.camera.fy, s.camera.cx, s.camera.cy, s.camera.width, s.camera.height);
  const auto& r = s.extrinsics.rotation;
  fmt::print(os, "extrinsics:\n  v_arm: {}\n  rotation:\n", list(s.extrinsics.v_arm));
  for (int i = 0; i < 3; ++i) fmt::print(os, "    - {}\n", list(r.row(i).transpose()));
  const auto& g = s.workspace.geometry;
  fmt::print(os, "workspace:\n  steps_per_joint: {}\n  voxel_size: {}\n  origin: {}\n  dims: [{}, {}, {}]\n",
             s.workspace.steps_per_joint, g.voxel_size, list(g.origin), g.dims[0], g.dims[1], g.dims[2]);
  fmt::print(os, "perception:\n  bin_width: {}\n  center_method: {}\n", s.perception.bin_width,
             s.perception.center_method == CenterMethod::kCentroid ? "centroid" : "quadric_fit");
  const auto& p = s.planner;
  fmt::print(os,
             "planner:\n  pos_tol: {}\n  ori_tol: {}\n  damping: {}\n  max_iterations: {}\n  max_step: {}\n"
             "  trajectory_dt: {}\n  lattice_step: {}\n  lattice_bound: {}\n",
             p.pos_tol, p.ori_tol, p.damping, p.max_iterations, p.max_step, p.trajectory_dt, p.reposition.lattice_step,
             p.reposition.lattice_bound);
  const auto& w = s.world;
  fmt::print(os, "world:\n  avocado_center: {}\n", list(w.avocado_center));
  if (w.avocado_axis) fmt::print(os, "  avocado_axis: {}\n", list(*w.avocado_axis));
  fmt::print(os, "  semi_axes: {}\n", list(w.semi_axes));
  if (!w.distractors.empty()) {
    fmt::print(os, "  distractors:\n");
    for (const auto& d : w.distractors) fmt::print(os, "    - {}\n", list(d));
  }
  fmt::print(os, "  elasticity_windup: {}\n  detach_threshold: {}\n  wrist_limit: {}\n  peduncle_noise: {}\n",
             w.elasticity_windup, w.detach_threshold, w.wrist_limit, w.peduncle_noise);
  const auto& m = s.sim;
  fmt::print(os,
             "sim:\n  dt: {}\n  grasp_radius: {}\n  wrist_rate: {}\n  finger_close_duration: {}\n  dwell: {}\n"
             "  fixer_enabled: {}\n  repositioning_enabled: {}\n",
             m.dt, m.grasp_radius, m.wrist_rate, m.finger_close_duration, m.dwell, m.fixer_enabled,
             m.repositioning_enabled);
}

}  // namespace avo
