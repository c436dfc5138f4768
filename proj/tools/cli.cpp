#include "cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "avoharvest/config.hpp"
#include "avoharvest/error.hpp"
#include "avoharvest/formats.hpp"
#include "avoharvest/harvest_sim.hpp"
#include "avoharvest/kinematics.hpp"
#include "avoharvest/planner.hpp"
#include "avoharvest/workspace.hpp"

namespace fs = std::filesystem;

namespace avo::cli {

namespace {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

// Prints 0 instead of -0 after rounding.
double tidy(double v, int decimals) { return std::abs(v) < 0.5 * std::pow(10.0, -decimals) ? 0.0 : v; }

ScenarioSpec load_spec(const Options& opt, const std::string& positional = {}) {
  const std::string& path = positional.empty() ? opt.config : positional;
  ScenarioSpec spec = path.empty() ? ScenarioSpec{} : load_scenario(path);
  if (opt.seed) spec.seed = *opt.seed;
  return spec;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open input file", path);
  return in;
}

// Outputs are rendered to memory first, so a failing command never leaves a partial file.
void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(fmt::format("cannot write {}", path.string()));
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError(fmt::format("write failed: {}", path.string()));
}

void emit(const Options& opt, std::ostream& out, const std::string& text) {
  if (opt.out.empty()) {
    out << text;
  } else {
    write_file(opt.out, text);
  }
}

template <typename Fn>
std::string capture(Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  return ss.str();
}

std::string vec_str(const Eigen::VectorXd& v, int decimals) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += fmt::format("{:.{}f}", tidy(v[i], decimals), decimals);
  }
  return s + "]";
}

JointVectord to_joints(const std::vector<double>& v) {
  return Eigen::Map<const JointVectord>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// ---- commands -------------------------------------------------------------

int cmd_fk(const Options& opt, const std::string& arm_name, const std::vector<double>& joints, std::ostream& out) {
  const ScenarioSpec spec = load_spec(opt);
  const ArmModeld& arm = spec.arm(arm_from_string(arm_name));
  const Posed pose = forward_kinematics(arm, to_joints(joints));
  emit(opt, out, capture([&](std::ostream& os) {
         const auto& p = pose.position;
         fmt::print(os, "{:.3f} {:.3f} {:.3f}\n", tidy(p.x(), 3), tidy(p.y(), 3), tidy(p.z(), 3));
         for (int r = 0; r < 3; ++r) {
           fmt::print(os, "{:.6f} {:.6f} {:.6f}\n", tidy(pose.rotation(r, 0), 6), tidy(pose.rotation(r, 1), 6),
                      tidy(pose.rotation(r, 2), 6));
         }
       }));
  return kOk;
}

int cmd_ik(const Options& opt, const std::string& arm_name, const std::vector<double>& target,
           const std::vector<double>& ypr, const std::vector<double>& start, const std::string& constraint,
           std::ostream& out) {
  const ScenarioSpec spec = load_spec(opt);
  const ArmModeld& arm = spec.arm(arm_from_string(arm_name));
  Posed goal;
  goal.position = Eigen::Vector3d(target[0], target[1], target[2]);
  goal.rotation = ypr.empty() ? Eigen::Matrix3d::Identity()
                              : from_euler_zyx<double>(Eigen::Vector3d(ypr[0], ypr[1], ypr[2]));
  IkOptions ik = spec.planner.ik_options();
  if (constraint == "none") ik.constraint = OrientationConstraint::kNone;
  else if (constraint == "approach") ik.constraint = OrientationConstraint::kApproachAxis;
  else if (constraint == "full") ik.constraint = OrientationConstraint::kFull;
  const JointVectord seed = start.empty() ? arm.home() : to_joints(start);
  const IkResult r = solve_ik(arm, goal, seed, ik);
  emit(opt, out, capture([&](std::ostream& os) {
         fmt::print(os, "joints: {}\n", vec_str(r.joints, 9));
         fmt::print(os, "position_error: {:.6f}\n", r.position_error);
         fmt::print(os, "orientation_error: {:.6f}\n", r.orientation_error);
         fmt::print(os, "iterations: {}\n", r.iterations);
       }));
  return kOk;
}

int cmd_workspace(const Options& opt, int workers, std::ostream& out) {
  const ScenarioSpec spec = load_spec(opt);
  const fs::path grid_path = opt.out.empty() ? fs::path("workspace.grid") : fs::path(opt.out);
  fs::path csv_path = grid_path;
  csv_path += ".csv";
  const WorkspaceGrid grid = build_workspace(spec.gripper, spec.fixer, spec.workspace.steps_per_joint,
                                             spec.chassis, spec.workspace.geometry, workers);
  write_file(grid_path, capture([&](std::ostream& os) { write_grid(os, grid); }));
  write_file(csv_path, capture([&](std::ostream& os) { write_grid_points_csv(os, grid); }));
  for (ArmId arm : {ArmId::kGripper, ArmId::kFixer}) {
    const auto& set = grid.reachable(arm);
    fmt::print(out, "{}: evaluated {} colliding {} occupied {}\n", to_string(arm), set.evaluated, set.colliding,
               set.occupied_count());
  }
  fmt::print(out, "wrote {} and {}\n", grid_path.string(), csv_path.string());
  return kOk;
}

int cmd_render(const Options& opt, const std::string& scenario, std::ostream& out) {
  const ScenarioSpec spec = load_spec(opt, scenario);
  const auto [world, offset] = make_world(spec);
  const SyntheticScene scene = render_synthetic_scene(world, spec.camera, spec.extrinsics);
  const std::string prefix = opt.out.empty() ? "scene" : opt.out;
  write_file(prefix + ".avmk", capture([&](std::ostream& os) { write_masks(os, scene.detections); }));
  write_file(prefix + ".pgm", capture([&](std::ostream& os) { write_depth_pgm(os, scene.depth); }));
  fmt::print(out, "rendered {} masks into {}.avmk and {}.pgm\n", scene.detections.count(), prefix, prefix);
  return kOk;
}

int cmd_perceive(const Options& opt, const std::string& mask_path, const std::string& depth_path,
                 std::ostream& out) {
  const ScenarioSpec spec = load_spec(opt);
  DetectionSet detections;
  {
    auto in = open_in(mask_path);
    try {
      detections = read_masks(in);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), mask_path);
    }
  }
  DepthImage depth;
  {
    auto in = open_in(depth_path);
    try {
      depth = read_depth_pgm(in);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), depth_path);
    }
  }
  const auto estimates = estimate_poses(detections, depth, spec.camera, spec.extrinsics, spec.perception);
  emit(opt, out, capture([&](std::ostream& os) { write_estimates(os, estimates); }));
  return kOk;
}

// Runs the machine through Perceive and Plan only.
std::pair<HarvestState, SimWorld> run_until_planned(const HarvestMachine& machine, SimWorld world) {
  HarvestState state;
  while (state.phase == HarvestPhase::kHome || state.phase == HarvestPhase::kPerceive ||
         state.phase == HarvestPhase::kPlan) {
    std::tie(state, world) = machine.step(state, world, machine.spec().sim.dt);
  }
  return {state, world};
}

int cmd_plan(const Options& opt, const std::string& scenario, std::ostream& out, std::ostream& err) {
  const ScenarioSpec spec = load_spec(opt, scenario);
  auto [world, offset] = make_world(spec);
  HarvestMachine machine(spec);
  const auto [state, moved] = run_until_planned(machine, world);
  if (!state.plan) {
    fmt::print(err, "plan failed: {}\n", state.message);
    return kPlan;
  }
  const HarvestPlan& plan = *state.plan;
  const std::string summary = capture([&](std::ostream& os) {
    fmt::print(os, "base_translation: {}\n", vec_str(plan.base.translation, 6));
    fmt::print(os, "reposition_required: {}\n", plan.base.required ? "true" : "false");
    fmt::print(os, "gripper_target: {}\n", vec_str(plan.staging.gripper_target.position, 6));
    fmt::print(os, "fixer_target: {}\n", vec_str(plan.staging.fixer_target.position, 6));
    fmt::print(os, "gripper_goal: {}\n", vec_str(plan.gripper_goal, 9));
    fmt::print(os, "fixer_goal: {}\n", vec_str(plan.fixer_goal, 9));
    fmt::print(os, "fixer_approach_waypoints: {}\n", plan.fixer_approach.waypoints.size());
    fmt::print(os, "gripper_approach_waypoints: {}\n", plan.gripper_approach.waypoints.size());
  });
  if (opt.out.empty()) {
    out << summary;
    return kOk;
  }
  const fs::path dir(opt.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  write_file(dir / "plan.yaml", summary);
  const std::pair<const char*, const JointTrajectory*> trajectories[] = {
      {"fixer_approach.csv", &plan.fixer_approach},
      {"gripper_approach.csv", &plan.gripper_approach},
      {"gripper_return.csv", &plan.gripper_return},
      {"fixer_return.csv", &plan.fixer_return},
  };
  for (const auto& [name, traj] : trajectories) {
    write_file(dir / name, capture([&](std::ostream& os) { write_trajectory_csv(os, *traj); }));
  }
  fmt::print(out, "wrote plan to {}\n", dir.string());
  return kOk;
}

int cmd_harvest(const Options& opt, const std::string& scenario, std::ostream& out) {
  const ScenarioSpec spec = load_spec(opt, scenario);
  const HarvestReport report = simulate_harvest(spec);
  const std::string text = capture([&](std::ostream& os) { write_report(os, report); });
  if (opt.out.empty()) {
    out << text;
  } else {
    fs::path timeline(opt.out);
    timeline.replace_extension(".timeline.csv");
    write_file(opt.out, text);
    write_file(timeline, capture([&](std::ostream& os) { write_timeline_csv(os, report); }));
  }
  switch (report.outcome) {
    case Outcome::kSuccess: return kOk;
    case Outcome::kPlanFail: return kPlan;
    default: return kHarvestFailed;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bimanual avocado harvesting toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  Options opt;
  app.add_option("--config", opt.config, "Scenario / configuration YAML file");
  app.add_option("--seed", opt.seed, "Override the scenario seed");
  app.add_option("--out", opt.out, "Output path (meaning depends on the subcommand)");

  std::string arm;
  std::vector<double> joints, target, ypr, start;
  std::string constraint = "default";
  std::string scenario, masks, depth;
  int workers = 0;

  auto* fk = app.add_subcommand("fk", "Forward kinematics");
  fk->add_option("arm", arm, "gripper or fixer")->required();
  fk->add_option("joints", joints, "Joint angles (rad)")->required();

  auto* ik = app.add_subcommand("ik", "Inverse kinematics");
  ik->add_option("arm", arm, "gripper or fixer")->required();
  ik->add_option("--target", target, "Target position x y z (mm)")->required()->expected(3);
  ik->add_option("--ypr", ypr, "Target orientation yaw pitch roll (rad)")->expected(3);
  ik->add_option("--start", start, "Seed joint angles (rad); zeros by default");
  ik->add_option("--constraint", constraint, "default, none, approach or full")
      ->check(CLI::IsMember({"default", "none", "approach", "full"}));

  auto* ws = app.add_subcommand("workspace", "Sample both reachable sets and write the grid and CSV");
  ws->add_option("--workers", workers, "Worker threads (0 = hardware concurrency)");

  auto* render = app.add_subcommand("render", "Render the scenario scene to a mask file and depth PGM");
  render->add_option("scenario", scenario, "Scenario file (overrides --config)");

  auto* perceive = app.add_subcommand("perceive", "Estimate avocado poses from a mask file and depth image");
  perceive->add_option("masks", masks, "Mask interchange file")->required();
  perceive->add_option("depth", depth, "16-bit PGM depth image (mm)")->required();

  auto* plan = app.add_subcommand("plan", "Perceive and plan, writing trajectories");
  plan->add_option("scenario", scenario, "Scenario file (overrides --config)");

  auto* harvest = app.add_subcommand("harvest", "Simulate a full harvest and write the report");
  harvest->add_option("scenario", scenario, "Scenario file (overrides --config)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();  // program name
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (fk->parsed()) return cmd_fk(opt, arm, joints, out);
    if (ik->parsed()) return cmd_ik(opt, arm, target, ypr, start, constraint, out);
    if (ws->parsed()) return cmd_workspace(opt, workers, out);
    if (render->parsed()) return cmd_render(opt, scenario, out);
    if (perceive->parsed()) return cmd_perceive(opt, masks, depth, out);
    if (plan->parsed()) return cmd_plan(opt, scenario, out, err);
    if (harvest->parsed()) return cmd_harvest(opt, scenario, out);
  } catch (const ParseError& e) {
    err << "load error: " << e.what() << "\n";
    return kLoad;
  } catch (const DimensionError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const IkError& e) {
    err << "plan error: " << e.what() << "\n";
    return kPlan;
  } catch (const PlanningError& e) {
    err << "plan error: " << e.what() << "\n";
    return kPlan;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return arm.empty() ? kRuntime : kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace avo::cli
