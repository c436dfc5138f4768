#include "avoharvest/perception.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace avo {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw DomainError("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw DomainError("image size must be positive");
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw DomainError("principal point outside the image");
  }
}

PointCloud backproject(const MaskImage& mask, const DepthImage& depth, const CameraIntrinsics& intr) {
  intr.validate();
  if (mask.rows() != intr.height || mask.cols() != intr.width || depth.rows() != intr.height ||
      depth.cols() != intr.width) {
    throw DimensionError("mask " + std::to_string(mask.cols()) + "x" + std::to_string(mask.rows()) +
                         ", depth " + std::to_string(depth.cols()) + "x" + std::to_string(depth.rows()) +
                         " and intrinsics " + std::to_string(intr.width) + "x" + std::to_string(intr.height) +
                         " disagree");
  }
  std::vector<Eigen::Vector3d> points;
  for (Eigen::Index v = 0; v < mask.rows(); ++v) {
    for (Eigen::Index u = 0; u < mask.cols(); ++u) {
      if (!mask(v, u)) continue;
      const double z = depth(v, u);
      if (!std::isfinite(z) || z <= 0.0) continue;
      points.emplace_back((static_cast<double>(u) - intr.cx) * z / intr.fx,
                          (static_cast<double>(v) - intr.cy) * z / intr.fy, z);
    }
  }
  PointCloud cloud(3, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) cloud.col(static_cast<Eigen::Index>(i)) = points[i];
  return cloud;
}

ClusterSet histogram_filter(const PointCloud& cloud, int k, double bin_width) {
  if (k < 1) throw DomainError("histogram_filter needs k >= 1");
  if (!(bin_width > 0.0)) throw DomainError("bin width must be positive");
  if (cloud.cols() == 0) throw DomainError("histogram_filter on an empty cloud");

  const Eigen::Index n = cloud.cols();
  std::vector<long> bin(static_cast<std::size_t>(n));
  std::map<long, Eigen::Index> counts;
  for (Eigen::Index i = 0; i < n; ++i) {
    const long b = static_cast<long>(std::floor(cloud.col(i).norm() / bin_width));
    bin[static_cast<std::size_t>(i)] = b;
    ++counts[b];
  }

  std::vector<std::pair<long, Eigen::Index>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  // A peak owns its bin and both neighbours; neighbourhoods may not overlap.
  std::vector<long> peaks;
  for (const auto& [b, count] : ranked) {
    if (std::all_of(peaks.begin(), peaks.end(), [b = b](long p) { return std::abs(p - b) >= 3; })) {
      peaks.push_back(b);
      if (static_cast<int>(peaks.size()) == k) break;
    }
  }
  if (static_cast<int>(peaks.size()) < k) throw ClusterCountError(k, static_cast<int>(peaks.size()));
  std::sort(peaks.begin(), peaks.end());

  ClusterSet out;
  out.members.resize(peaks.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const long b = bin[static_cast<std::size_t>(i)];
    bool kept = false;
    for (std::size_t c = 0; c < peaks.size(); ++c) {
      if (std::abs(b - peaks[c]) <= 1) {
        out.members[c].push_back(i);
        kept = true;
        break;
      }
    }
    if (!kept) out.rejected_members.push_back(i);
  }
  auto gather = [&](const std::vector<Eigen::Index>& idx) {
    PointCloud pc(3, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) pc.col(static_cast<Eigen::Index>(j)) = cloud.col(idx[j]);
    return pc;
  };
  for (const auto& m : out.members) out.clusters.push_back(gather(m));
  out.rejected = gather(out.rejected_members);
  return out;
}

Eigen::Vector3d cluster_centroid(const PointCloud& cluster) {
  if (cluster.cols() == 0) throw DomainError("centroid of an empty cluster");
  return cluster.rowwise().mean();
}

std::optional<Eigen::Vector3d> fit_ellipsoid_center(const PointCloud& cluster) {
  if (cluster.cols() < 20) return std::nullopt;
  const Eigen::Vector3d mean = cluster.rowwise().mean();
  const Eigen::Matrix3Xd centered = cluster.colwise() - mean;
  const double scale = std::sqrt(centered.colwise().squaredNorm().mean());
  if (!(scale > 0.0)) return std::nullopt;
  const Eigen::Matrix3Xd q = centered / scale;

  // x'Ax + b'x = 1 in centred, scaled coordinates.
  Eigen::MatrixXd design(q.cols(), 9);
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    const double x = q(0, i), y = q(1, i), z = q(2, i);
    design.row(i) << x * x, y * y, z * z, 2 * x * y, 2 * x * z, 2 * y * z, 2 * x, 2 * y, 2 * z;
  }
  const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(Eigen::VectorXd::Ones(q.cols()));
  if (!coef.allFinite()) return std::nullopt;

  Eigen::Matrix3d a;
  a << coef[0], coef[3], coef[4],
       coef[3], coef[1], coef[5],
       coef[4], coef[5], coef[2];
  const Eigen::LLT<Eigen::Matrix3d> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Eigen::Vector3d offset = -llt.solve(coef.tail<3>()) * scale;

  // The centre of a depth-visible surface lies behind it, within a few cluster radii.
  const double radius = std::sqrt(centered.colwise().squaredNorm().maxCoeff());
  if (!offset.allFinite() || offset.norm() > 2.0 * radius || offset.dot(mean) < 0.0) return std::nullopt;
  return mean + offset;
}

OrientedBox fit_obb(const PointCloud& cluster) {
  if (cluster.cols() < 4) throw DegenerateCloudError(std::min<int>(static_cast<int>(cluster.cols()) - 1, 2));
  const Eigen::Vector3d mean = cluster.rowwise().mean();
  const Eigen::Matrix3Xd centered = cluster.colwise() - mean;
  const Eigen::Matrix3d scatter = centered * centered.transpose() / static_cast<double>(cluster.cols());
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  const Eigen::Vector3d values = eig.eigenvalues();  // ascending
  const double largest = values[2];
  int rank = 0;
  for (int i = 0; i < 3; ++i) rank += values[i] > 1e-10 * largest && values[i] > 0.0 ? 1 : 0;
  if (rank < 3) throw DegenerateCloudError(rank);

  OrientedBox box;
  box.rotation = eig.eigenvectors().rowwise().reverse();
  if (box.rotation.determinant() < 0.0) box.rotation.col(2) *= -1.0;
  const Eigen::Matrix3Xd proj = box.rotation.transpose() * centered;
  const Eigen::Vector3d lo = proj.rowwise().minCoeff();
  const Eigen::Vector3d hi = proj.rowwise().maxCoeff();
  box.extents = hi - lo;
  box.center = mean + box.rotation * (0.5 * (lo + hi));
  return box;
}

Eigen::Matrix3d align_frame(const Eigen::Matrix3d& obb_rotation) {
  if ((obb_rotation.transpose() * obb_rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
    throw DomainError("align_frame needs an orthonormal frame");
  }
  Eigen::Matrix3d out;
  std::array<bool, 3> used{false, false, false};
  for (int axis = 0; axis < 2; ++axis) {
    int best = -1;
    double best_dot = -1.0;
    for (int c = 0; c < 3; ++c) {
      if (used[static_cast<std::size_t>(c)]) continue;
      const double d = std::abs(obb_rotation(axis, c));
      if (d > best_dot) {
        best_dot = d;
        best = c;
      }
    }
    used[static_cast<std::size_t>(best)] = true;
    out.col(axis) = obb_rotation(axis, best) >= 0.0 ? obb_rotation.col(best) : Eigen::Vector3d(-obb_rotation.col(best));
  }
  out.col(2) = out.col(0).cross(out.col(1));
  if (out(2, 2) < 0.0) {
    out.col(1) *= -1.0;
    out.col(2) *= -1.0;
  }
  return out;
}

Eigen::Vector3d camera_to_arm(const Eigen::Vector3d& p_cam, const ExtrinsicCalibration& calib) {
  return calib.v_arm + calib.rotation * p_cam;
}

Eigen::Vector3d arm_to_camera(const Eigen::Vector3d& p_arm, const ExtrinsicCalibration& calib) {
  return calib.rotation.transpose() * (p_arm - calib.v_arm);
}

AvocadoEstimate camera_to_arm(const AvocadoEstimate& est, const ExtrinsicCalibration& calib) {
  if (est.frame == Frame::kArm) return est;
  AvocadoEstimate out = est;
  out.center = camera_to_arm(est.center, calib);
  out.rotation = calib.rotation * est.rotation;
  out.euler = euler_zyx<double>(out.rotation);
  out.frame = Frame::kArm;
  return out;
}

const AvocadoEstimate& select_target(const std::vector<AvocadoEstimate>& estimates) {
  if (estimates.empty()) throw DomainError("select_target on an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < estimates.size(); ++i) {
    if (estimates[i].distance < estimates[best].distance) best = i;
  }
  return estimates[best];
}

AvocadoEstimate estimate_cluster(const PointCloud& cluster, const PerceptionOptions& options) {
  AvocadoEstimate est;
  est.center = cluster_centroid(cluster);
  if (options.center_method == CenterMethod::kQuadricFit) {
    if (const auto fitted = fit_ellipsoid_center(cluster)) est.center = *fitted;
  }
  est.rotation = align_frame(fit_obb(cluster).rotation);
  est.euler = euler_zyx<double>(est.rotation);
  est.distance = est.center.norm();
  est.frame = Frame::kCamera;
  return est;
}

std::vector<AvocadoEstimate> estimate_poses(const DetectionSet& detections, const DepthImage& depth,
                                            const CameraIntrinsics& intr, const ExtrinsicCalibration& calib,
                                            const PerceptionOptions& options) {
  if (detections.count() == 0) return {};

  std::vector<PointCloud> parts;
  Eigen::Index total = 0;
  try {
    for (const auto& mask : detections.masks) {
      parts.push_back(backproject(mask, depth, intr));
      total += parts.back().cols();
    }
  } catch (const std::exception& e) {
    throw PipelineError("backproject", e.what());
  }
  PointCloud cloud(3, total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    cloud.middleCols(at, p.cols()) = p;
    at += p.cols();
  }
  if (total == 0) throw PipelineError("backproject", "no masked pixel has a valid depth");

  ClusterSet clusters;
  try {
    clusters = histogram_filter(cloud, detections.count(), options.bin_width);
  } catch (const std::exception& e) {
    throw PipelineError("histogram_filter", e.what());
  }

  std::vector<AvocadoEstimate> out;
  out.reserve(clusters.clusters.size());
  for (const auto& cluster : clusters.clusters) {
    try {
      out.push_back(camera_to_arm(estimate_cluster(cluster, options), calib));
    } catch (const std::exception& e) {
      throw PipelineError("pose", e.what());
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.distance < b.distance; });
  return out;
}

}  // namespace avo
