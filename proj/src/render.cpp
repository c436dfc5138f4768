#include <cmath>
#include <limits>

#include "avoharvest/harvest_sim.hpp"

namespace avo {

namespace {

struct Ellipsoid {
  Eigen::Vector3d center;  // camera frame, m
  Eigen::Matrix3d shape;   // (p - c)' shape (p - c) = 1
};

Eigen::Matrix3d basis_with_z(const Eigen::Vector3d& axis) {
  const Eigen::Vector3d z = axis.normalized();
  const Eigen::Vector3d helper =
      std::abs(z.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  const Eigen::Vector3d x = (helper - helper.dot(z) * z).normalized();
  Eigen::Matrix3d b;
  b << x, z.cross(x), z;
  return b;
}

Ellipsoid make_ellipsoid(const Eigen::Vector3d& center_arm_mm, const SimWorld& world,
                         const CameraIntrinsics& intr, const ExtrinsicCalibration& calib) {
  Ellipsoid e;
  e.center = arm_to_camera(center_arm_mm / 1000.0, calib);
  if (!(e.center.z() > 0.0)) throw DomainError("avocado behind the camera");
  const Eigen::Vector2d px = intr.project(e.center);
  if (px.x() < 0.0 || px.x() >= intr.width || px.y() < 0.0 || px.y() >= intr.height) {
    throw DomainError("avocado outside the camera frustum");
  }
  const Eigen::Matrix3d q = basis_with_z(calib.rotation.transpose() * world.avocado_axis);
  const Eigen::Vector3d inv_sq = (world.semi_axes / 1000.0).cwiseAbs2().cwiseInverse();
  e.shape = q * inv_sq.asDiagonal() * q.transpose();
  return e;
}

}  // namespace

SyntheticScene render_synthetic_scene(const SimWorld& world, const CameraIntrinsics& intr,
                                      const ExtrinsicCalibration& calib) {
  intr.validate();
  if ((world.semi_axes.array() <= 0.0).any()) throw DomainError("avocado semi-axes must be positive");

  std::vector<Ellipsoid> bodies;
  bodies.push_back(make_ellipsoid(world.avocado_center, world, intr, calib));
  for (const auto& d : world.distractors) bodies.push_back(make_ellipsoid(d, world, intr, calib));

  SyntheticScene scene;
  scene.depth = DepthImage::Zero(intr.height, intr.width);
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> owner =
      Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Constant(intr.height, intr.width, -1);

  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      const Eigen::Vector3d ray((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
      double nearest = std::numeric_limits<double>::infinity();
      int hit = -1;
      for (std::size_t b = 0; b < bodies.size(); ++b) {
        // Depth z along the ray solves a z^2 - 2 b z + c = 0.
        const Eigen::Vector3d mr = bodies[b].shape * ray;
        const double qa = ray.dot(mr);
        const double qb = bodies[b].center.dot(mr);
        const double qc = bodies[b].center.dot(bodies[b].shape * bodies[b].center) - 1.0;
        const double disc = qb * qb - qa * qc;
        if (disc < 0.0) continue;
        const double z = (qb - std::sqrt(disc)) / qa;
        if (z > 0.0 && z < nearest) {
          nearest = z;
          hit = static_cast<int>(b);
        }
      }
      if (hit >= 0) {
        scene.depth(v, u) = nearest;
        owner(v, u) = hit;
      }
    }
  }

  scene.detections.width = intr.width;
  scene.detections.height = intr.height;
  for (std::size_t b = 0; b < bodies.size(); ++b) {
    MaskImage mask = (owner == static_cast<int>(b)).cast<std::uint8_t>();
    if (mask.any()) scene.detections.masks.push_back(std::move(mask));
  }
  return scene;
}

}  // namespace avo
