// Independent oracles and scene generators shared by the unit and acceptance tests.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "avoharvest/config.hpp"
#include "avoharvest/harvest_sim.hpp"
#include "avoharvest/perception.hpp"
#include "avoharvest/workspace.hpp"

namespace avo::test {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kL = 116.76;

// ---- hand-written arm matrices (one factor per joint, no DH helper) ----

inline Eigen::Matrix4d translate_z(double z) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(2, 3) = z;
  return m;
}

// alpha = 0 link
inline Eigen::Matrix4d link_flat(double q, double a, double d) {
  const double c = std::cos(q), s = std::sin(q);
  Eigen::Matrix4d m;
  m << c, -s, 0, a * c,
       s,  c, 0, a * s,
       0,  0, 1, d,
       0,  0, 0, 1;
  return m;
}

// alpha = -pi/2 link
inline Eigen::Matrix4d link_down(double q, double a) {
  const double c = std::cos(q), s = std::sin(q);
  Eigen::Matrix4d m;
  m << c, 0, -s, a * c,
       s, 0,  c, a * s,
       0, -1, 0, 0,
       0, 0,  0, 1;
  return m;
}

// alpha = +pi/2 link
inline Eigen::Matrix4d link_up(double q, double a) {
  const double c = std::cos(q), s = std::sin(q);
  Eigen::Matrix4d m;
  m << c, 0,  s, a * c,
       s, 0, -c, a * s,
       0, 1,  0, 0,
       0, 0,  0, 1;
  return m;
}

inline Eigen::Matrix4d oracle_gripper(const Eigen::Vector3d& q) {
  return translate_z(kL) * link_flat(q[0], 142, 0) * link_down(q[1], 111) * link_flat(q[2], 200, 15.975);
}

inline Eigen::Matrix4d oracle_fixer(const Eigen::Vector4d& q) {
  return translate_z(-kL) * link_down(q[0], 142) * link_up(q[1], 111) * link_down(q[2], 80) *
         link_flat(q[3], 122, 0);
}

inline Eigen::Matrix3d oracle_extrinsic_rotation() {
  const double c = std::cos(15.0 * kPi / 180.0), s = std::sin(15.0 * kPi / 180.0);
  Eigen::Matrix3d r;
  r << -1, 0, 0,
        0, -c, -s,
        0, -s, c;
  return r;
}

// ---- random helpers ----

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline JointVectord random_joints(const ArmModeld& arm, std::mt19937_64& rng) {
  JointVectord q(arm.dof());
  for (int i = 0; i < arm.dof(); ++i) {
    const auto& lim = arm.joint_limits()[static_cast<std::size_t>(i)];
    q[i] = std::uniform_real_distribution<double>(lim.lower, lim.upper)(rng);
  }
  return q;
}

// ---- histogram fixture: three Gaussian blobs plus uniform noise ----

struct BlobFixture {
  PointCloud cloud;
  std::vector<Eigen::Vector3d> centers;  // ground truth, ascending distance
  std::vector<int> label;                // blob index, -1 for noise
  int noise_count = 0;
};

// Blobs sit near the (1,1,1) diagonal at 0.5, 1.0 and 1.5 m; noise is uniform
// in the [0, 2] m cube.
inline BlobFixture three_blob_fixture(std::uint64_t seed, int per_blob = 100, int noise = 50,
                                      double sigma = 0.01) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  const Eigen::Vector3d dirs[3] = {Eigen::Vector3d(1.0, 1.1, 0.9).normalized(),
                                   Eigen::Vector3d(0.9, 1.0, 1.1).normalized(),
                                   Eigen::Vector3d(1.1, 0.9, 1.0).normalized()};
  const double dist[3] = {0.5, 1.0, 1.5};
  BlobFixture f;
  f.noise_count = noise;
  std::vector<Eigen::Vector3d> pts;
  for (int b = 0; b < 3; ++b) {
    f.centers.push_back(dist[b] * dirs[b]);
    for (int i = 0; i < per_blob; ++i) {
      pts.push_back(f.centers.back() + Eigen::Vector3d(n(rng), n(rng), n(rng)));
      f.label.push_back(b);
    }
  }
  for (int i = 0; i < noise; ++i) {
    pts.emplace_back(u(rng), u(rng), u(rng));
    f.label.push_back(-1);
  }
  f.cloud.resize(3, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) f.cloud.col(static_cast<Eigen::Index>(i)) = pts[i];
  return f;
}

// ---- synthetic scenes ----

// World with one avocado at a camera-frame point (m); the axis is given in the camera frame.
inline SimWorld world_at_camera(const Eigen::Vector3d& p_cam, const Eigen::Vector3d& axis_cam,
                                const ExtrinsicCalibration& calib = {}) {
  SimWorld w;
  w.avocado_center = camera_to_arm(p_cam, calib) * 1000.0;
  w.avocado_axis = (calib.rotation * axis_cam).normalized();
  w.peduncle_anchor = w.avocado_center + kPeduncleOffset * w.avocado_axis;
  return w;
}

// Camera-frame point 0.3 to 1.0 m from the camera whose projection stays in
// the central 70% of the default image.
inline Eigen::Vector3d random_placement(std::mt19937_64& rng, const CameraIntrinsics& intr = {}) {
  std::uniform_real_distribution<double> dist(0.3, 1.0);
  std::uniform_real_distribution<double> fu(0.15 * intr.width, 0.85 * intr.width);
  std::uniform_real_distribution<double> fv(0.15 * intr.height, 0.85 * intr.height);
  const double u = fu(rng), v = fv(rng);
  const Eigen::Vector3d ray((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
  return dist(rng) * ray.normalized();
}

inline Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
}

// ---- shared default workspace grid (5 degree sampling) ----

inline std::shared_ptr<const WorkspaceGrid> default_grid() {
  static const auto grid = std::make_shared<const WorkspaceGrid>(
      build_workspace(gripper_arm(), fixer_arm(), 37, ChassisBox{}, GridGeometry{}));
  return grid;
}

#ifdef AVO_SOURCE_DIR
inline std::string scenario_path(const std::string& name) {
  return std::string(AVO_SOURCE_DIR) + "/scenarios/" + name;
}

inline ScenarioSpec scenario(const std::string& name) { return load_scenario(scenario_path(name)); }
#endif

}  // namespace avo::test
