/**
 * @file perception.hpp
 * @brief Mask + depth to avocado pose estimates: back-projection, distance
 *        histogram filtering, centroid / OBB estimation, axis alignment and
 *        the fixed camera-to-arm transform.
 *
 * Camera frame quantities are metres. Arm frame estimates are metres too;
 * the planner converts to millimetres.
 */
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <numbers>
#include <optional>
#include <string_view>
#include <vector>

#include "avoharvest/kinematics.hpp"

namespace avo {

struct CameraIntrinsics {
  double fx = 615.0;
  double fy = 615.0;
  double cx = 424.0;
  double cy = 240.0;
  int width = 848;
  int height = 480;

  /// @throws DomainError on non-positive focal lengths or a principal point off the image.
  void validate() const;
  Eigen::Vector2d project(const Eigen::Vector3d& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }
};

/// Row-major binary mask, rows = image height.
using MaskImage = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Row-major depth image in metres; 0 marks an invalid pixel.
using DepthImage = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Points as columns.
using PointCloud = Eigen::Matrix3Xd;

struct DetectionSet {
  int width = 0;
  int height = 0;
  std::vector<MaskImage> masks;

  int count() const { return static_cast<int>(masks.size()); }
};

struct ClusterSet {
  std::vector<PointCloud> clusters;  ///< ascending camera distance
  PointCloud rejected;
  std::vector<std::vector<Eigen::Index>> members;  ///< input column indices per cluster
  std::vector<Eigen::Index> rejected_members;
};

struct OrientedBox {
  Eigen::Matrix3d rotation;  ///< columns = box axes, descending variance
  Eigen::Vector3d center;
  Eigen::Vector3d extents;   ///< full side lengths along each axis
};

enum class Frame { kCamera, kArm };

inline std::string_view to_string(Frame f) { return f == Frame::kCamera ? "camera" : "arm"; }

struct AvocadoEstimate {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d euler = Eigen::Vector3d::Zero();  ///< intrinsic Z-Y-X (yaw, pitch, roll)
  double distance = 0.0;  ///< distance to the camera origin (m), frame independent
  Frame frame = Frame::kCamera;
};

/// Fixed mounting of the depth camera on the arm base.
struct ExtrinsicCalibration {
  Eigen::Vector3d v_arm{0.0, 0.08653, 0.06436};
  Eigen::Matrix3d rotation = rot_x(std::numbers::pi / 12.0) * rot_z(std::numbers::pi);
};

enum class CenterMethod {
  kCentroid,     ///< mean of the cluster points
  kQuadricFit,   ///< ellipsoid fit of the visible surface, centroid fallback
};

struct PerceptionOptions {
  double bin_width = 0.05;  ///< histogram bin (m)
  CenterMethod center_method = CenterMethod::kQuadricFit;
};

/// Masked pixels with positive finite depth to camera-frame points.
PointCloud backproject(const MaskImage& mask, const DepthImage& depth, const CameraIntrinsics& intr);

/// Keeps the `k` most populated distance bins (each with its two neighbours)
/// as clusters. Peaks whose neighbourhoods would overlap an already chosen
/// one are skipped.
/// @throws ClusterCountError when fewer than k peaks are available.
ClusterSet histogram_filter(const PointCloud& cloud, int k, double bin_width = 0.05);

Eigen::Vector3d cluster_centroid(const PointCloud& cluster);

/// Algebraic ellipsoid fit of the cluster; nullopt when the fit is not an
/// ellipsoid or its centre does not sit behind the visible surface.
std::optional<Eigen::Vector3d> fit_ellipsoid_center(const PointCloud& cluster);

/// PCA oriented bounding box.
/// @throws DegenerateCloudError for rank < 3 clouds.
OrientedBox fit_obb(const PointCloud& cluster);

/// Greedy relabelling of the box axes against the camera axes x, y, z.
/// @throws DomainError on non-orthonormal input.
Eigen::Matrix3d align_frame(const Eigen::Matrix3d& obb_rotation);

Eigen::Vector3d camera_to_arm(const Eigen::Vector3d& p_cam, const ExtrinsicCalibration& calib);
Eigen::Vector3d arm_to_camera(const Eigen::Vector3d& p_arm, const ExtrinsicCalibration& calib);
AvocadoEstimate camera_to_arm(const AvocadoEstimate& est, const ExtrinsicCalibration& calib);

/// Closest estimate; lowest index wins ties.
const AvocadoEstimate& select_target(const std::vector<AvocadoEstimate>& estimates);

/// Full pipeline, results in the arm frame ordered by ascending distance.
/// @throws PipelineError naming the failing stage.
std::vector<AvocadoEstimate> estimate_poses(const DetectionSet& detections, const DepthImage& depth,
                                            const CameraIntrinsics& intr,
                                            const ExtrinsicCalibration& calib,
                                            const PerceptionOptions& options = {});

/// Camera-frame estimate for one cluster (centre, aligned frame, distance).
AvocadoEstimate estimate_cluster(const PointCloud& cluster, const PerceptionOptions& options = {});

}  // namespace avo
