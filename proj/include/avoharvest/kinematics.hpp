/**
 * @file kinematics.hpp
 * @brief Denavit-Hartenberg models, forward kinematics and Jacobians for the
 *        3-DoF gripper arm and the 4-DoF fixer arm.
 *
 * Standard DH convention, one revolute joint per row:
 *   A_i(q) = Rot_z(q + theta_offset) * Trans_z(d) * Trans_x(a) * Rot_x(alpha)
 *
 * The arm base frames sit at +l (gripper) and -l (fixer) along the body z
 * axis, l = 116.76 mm. All arm-frame lengths are millimetres.
 *
 * The rotational zero of every joint is taken to be the DH zero; the
 * hardware's mechanical zero relative to the chassis is not modelled.
 */
#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "avoharvest/error.hpp"

namespace avo {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Transform = Eigen::Transform<Scalar, 3, Eigen::Isometry>;
template <typename Scalar>
using JointVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Jacobian = Eigen::Matrix<Scalar, 6, Eigen::Dynamic>;

using JointVectord = JointVector<double>;

/// Offset of each arm's first joint from the body origin along z (mm).
inline constexpr double kArmBaseOffset = 116.76;

template <typename Scalar>
struct DHRow {
  Scalar a{0};      ///< link length (mm)
  Scalar d{0};      ///< link offset (mm)
  Scalar alpha{0};  ///< link twist (rad)
  Scalar theta_offset{0};
};

template <typename Scalar>
struct JointLimit {
  Scalar lower{-std::numbers::pi_v<Scalar> / 2};
  Scalar upper{std::numbers::pi_v<Scalar> / 2};

  bool contains(Scalar q, Scalar tol = Scalar(1e-12)) const {
    return q >= lower - tol && q <= upper + tol;
  }
  Scalar clamp(Scalar q) const { return std::min(std::max(q, lower), upper); }
};

enum class ArmId { kGripper, kFixer };

inline std::string_view to_string(ArmId id) {
  return id == ArmId::kGripper ? "gripper" : "fixer";
}

inline ArmId arm_from_string(std::string_view name) {
  if (name == "gripper") return ArmId::kGripper;
  if (name == "fixer") return ArmId::kFixer;
  throw DomainError("unknown arm '" + std::string(name) + "' (expected gripper or fixer)");
}

/// Position plus orthonormal rotation; the geometric currency of the planner.
template <typename Scalar>
struct Pose {
  Vector3<Scalar> position = Vector3<Scalar>::Zero();
  Matrix3<Scalar> rotation = Matrix3<Scalar>::Identity();

  Transform<Scalar> to_transform() const {
    Transform<Scalar> t = Transform<Scalar>::Identity();
    t.linear() = rotation;
    t.translation() = position;
    return t;
  }
  static Pose from_transform(const Transform<Scalar>& t) {
    return Pose{t.translation(), t.linear()};
  }
};

using Posed = Pose<double>;

template <typename Scalar>
Matrix3<Scalar> rot_x(Scalar angle) {
  return Eigen::AngleAxis<Scalar>(angle, Vector3<Scalar>::UnitX()).toRotationMatrix();
}

template <typename Scalar>
Matrix3<Scalar> rot_z(Scalar angle) {
  return Eigen::AngleAxis<Scalar>(angle, Vector3<Scalar>::UnitZ()).toRotationMatrix();
}

template <typename Derived>
bool is_rotation(const Eigen::MatrixBase<Derived>& r, typename Derived::Scalar tol) {
  using Scalar = typename Derived::Scalar;
  if (r.rows() != 3 || r.cols() != 3) return false;
  const Matrix3<Scalar> gram = r.transpose() * r;
  return (gram - Matrix3<Scalar>::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - Scalar(1)) <= tol;
}

/// Intrinsic Z-Y-X Euler angles (yaw, pitch, roll) with R = Rz(yaw) Ry(pitch) Rx(roll).
template <typename Scalar>
Vector3<Scalar> euler_zyx(const Matrix3<Scalar>& r) {
  using std::atan2;
  using std::sqrt;
  const Scalar pitch = atan2(-r(2, 0), sqrt(r(0, 0) * r(0, 0) + r(1, 0) * r(1, 0)));
  Scalar yaw;
  Scalar roll;
  if (sqrt(r(0, 0) * r(0, 0) + r(1, 0) * r(1, 0)) < Scalar(1e-12)) {
    // gimbal lock: fold everything into yaw
    yaw = atan2(-r(0, 1), r(1, 1));
    roll = Scalar(0);
  } else {
    yaw = atan2(r(1, 0), r(0, 0));
    roll = atan2(r(2, 1), r(2, 2));
  }
  return {yaw, pitch, roll};
}

template <typename Scalar>
Matrix3<Scalar> from_euler_zyx(const Vector3<Scalar>& ypr) {
  return (Eigen::AngleAxis<Scalar>(ypr[0], Vector3<Scalar>::UnitZ()) *
          Eigen::AngleAxis<Scalar>(ypr[1], Vector3<Scalar>::UnitY()) *
          Eigen::AngleAxis<Scalar>(ypr[2], Vector3<Scalar>::UnitX()))
      .toRotationMatrix();
}

/// Standard DH homogeneous transform for one row at joint angle `q`.
template <typename Scalar>
Transform<Scalar> dh_transform(const DHRow<Scalar>& row, Scalar q) {
  using std::cos;
  using std::sin;
  const Scalar theta = q + row.theta_offset;
  const Scalar ct = cos(theta);
  const Scalar st = sin(theta);
  const Scalar ca = cos(row.alpha);
  const Scalar sa = sin(row.alpha);
  Transform<Scalar> t = Transform<Scalar>::Identity();
  t.linear() << ct, -st * ca, st * sa,
                st, ct * ca, -ct * sa,
                Scalar(0), sa, ca;
  t.translation() << row.a * ct, row.a * st, row.d;
  return t;
}

/// Immutable serial-chain description of one arm.
template <typename Scalar>
class ArmModel {
 public:
  ArmModel(ArmId id, std::vector<DHRow<Scalar>> rows, Scalar base_offset_z,
           std::vector<JointLimit<Scalar>> limits)
      : id_(id), rows_(std::move(rows)), base_offset_z_(base_offset_z), limits_(std::move(limits)) {
    if (rows_.empty()) throw DimensionError("arm model needs at least one DH row");
    if (limits_.size() != rows_.size()) {
      throw DimensionError("joint limit count " + std::to_string(limits_.size()) +
                           " does not match DH row count " + std::to_string(rows_.size()));
    }
    for (const auto& lim : limits_) {
      if (!(lim.lower <= lim.upper)) throw DomainError("joint limit with lower > upper");
    }
  }

  ArmId id() const { return id_; }
  std::string_view name() const { return to_string(id_); }
  const std::vector<DHRow<Scalar>>& rows() const { return rows_; }
  Scalar base_offset_z() const { return base_offset_z_; }
  const std::vector<JointLimit<Scalar>>& joint_limits() const { return limits_; }
  int dof() const { return static_cast<int>(rows_.size()); }

  Transform<Scalar> base_transform() const {
    Transform<Scalar> t = Transform<Scalar>::Identity();
    t.translation() << Scalar(0), Scalar(0), base_offset_z_;
    return t;
  }

  /// Upper bound on the distance from the arm base to the end-effector (mm).
  Scalar max_reach() const {
    Scalar r(0);
    for (const auto& row : rows_) r += std::hypot(row.a, row.d);
    return r;
  }

  void check_dimension(const JointVector<Scalar>& q) const {
    if (q.size() != dof()) {
      throw DimensionError(std::string(name()) + " arm expects " + std::to_string(dof()) +
                           " joints, got " + std::to_string(q.size()));
    }
  }

  bool within_limits(const JointVector<Scalar>& q, Scalar tol = Scalar(1e-12)) const {
    check_dimension(q);
    for (int i = 0; i < dof(); ++i) {
      if (!limits_[static_cast<std::size_t>(i)].contains(q[i], tol)) return false;
    }
    return true;
  }

  JointVector<Scalar> clamp(const JointVector<Scalar>& q) const {
    check_dimension(q);
    JointVector<Scalar> out(q.size());
    for (int i = 0; i < dof(); ++i) out[i] = limits_[static_cast<std::size_t>(i)].clamp(q[i]);
    return out;
  }

  JointVector<Scalar> home() const { return JointVector<Scalar>::Zero(dof()); }

 private:
  ArmId id_;
  std::vector<DHRow<Scalar>> rows_;
  Scalar base_offset_z_;
  std::vector<JointLimit<Scalar>> limits_;
};

using ArmModeld = ArmModel<double>;

/// Gripper arm: 3 rows, base at +l.
template <typename Scalar = double>
ArmModel<Scalar> gripper_arm() {
  const Scalar half_pi = std::numbers::pi_v<Scalar> / 2;
  return ArmModel<Scalar>(ArmId::kGripper,
                          {{Scalar(142), Scalar(0), Scalar(0), Scalar(0)},
                           {Scalar(111), Scalar(0), -half_pi, Scalar(0)},
                           {Scalar(200), Scalar(15.975), Scalar(0), Scalar(0)}},
                          Scalar(kArmBaseOffset), std::vector<JointLimit<Scalar>>(3));
}

/// Fixer arm: 4 rows, base at -l.
template <typename Scalar = double>
ArmModel<Scalar> fixer_arm() {
  const Scalar half_pi = std::numbers::pi_v<Scalar> / 2;
  return ArmModel<Scalar>(ArmId::kFixer,
                          {{Scalar(142), Scalar(0), -half_pi, Scalar(0)},
                           {Scalar(111), Scalar(0), half_pi, Scalar(0)},
                           {Scalar(80), Scalar(0), -half_pi, Scalar(0)},
                           {Scalar(122), Scalar(0), Scalar(0), Scalar(0)}},
                          Scalar(-kArmBaseOffset), std::vector<JointLimit<Scalar>>(4));
}

/// Frames of the chain: element 0 is the arm base, element i the frame after joint i.
template <typename Scalar>
std::vector<Transform<Scalar>> frame_chain(const ArmModel<Scalar>& arm, const JointVector<Scalar>& q) {
  arm.check_dimension(q);
  std::vector<Transform<Scalar>> frames;
  frames.reserve(static_cast<std::size_t>(arm.dof()) + 1);
  frames.push_back(arm.base_transform());
  for (int i = 0; i < arm.dof(); ++i) {
    frames.push_back(frames.back() * dh_transform(arm.rows()[static_cast<std::size_t>(i)], q[i]));
  }
  return frames;
}

template <typename Scalar>
Pose<Scalar> forward_kinematics(const ArmModel<Scalar>& arm, const JointVector<Scalar>& q) {
  arm.check_dimension(q);
  Transform<Scalar> t = arm.base_transform();
  for (int i = 0; i < arm.dof(); ++i) t = t * dh_transform(arm.rows()[static_cast<std::size_t>(i)], q[i]);
  return Pose<Scalar>::from_transform(t);
}

inline Posed fk_gripper(const JointVectord& q) {
  static const ArmModeld arm = gripper_arm();
  return forward_kinematics(arm, q);
}

inline Posed fk_fixer(const JointVectord& q) {
  static const ArmModeld arm = fixer_arm();
  return forward_kinematics(arm, q);
}

/// Geometric Jacobian by central differences of the forward kinematics.
/// Rows 0-2: linear velocity (mm/rad); rows 3-5: angular velocity (rad/rad).
template <typename Scalar>
Jacobian<Scalar> jacobian(const ArmModel<Scalar>& arm, const JointVector<Scalar>& q,
                          Scalar step = Scalar(1e-6)) {
  arm.check_dimension(q);
  Jacobian<Scalar> j(6, arm.dof());
  JointVector<Scalar> qp = q;
  JointVector<Scalar> qm = q;
  for (int i = 0; i < arm.dof(); ++i) {
    qp[i] = q[i] + step;
    qm[i] = q[i] - step;
    const Pose<Scalar> fp = forward_kinematics(arm, qp);
    const Pose<Scalar> fm = forward_kinematics(arm, qm);
    j.template block<3, 1>(0, i) = (fp.position - fm.position) / (2 * step);
    const Eigen::AngleAxis<Scalar> delta(Matrix3<Scalar>(fp.rotation * fm.rotation.transpose()));
    j.template block<3, 1>(3, i) = delta.axis() * delta.angle() / (2 * step);
    qp[i] = q[i];
    qm[i] = q[i];
  }
  return j;
}

/// Geometric Jacobian from the joint screw axes: column i = [z_{i-1} x (p - o_{i-1}); z_{i-1}].
template <typename Scalar>
Jacobian<Scalar> analytic_jacobian(const ArmModel<Scalar>& arm, const JointVector<Scalar>& q) {
  const auto frames = frame_chain(arm, q);
  const Vector3<Scalar> p = frames.back().translation();
  Jacobian<Scalar> j(6, arm.dof());
  for (int i = 0; i < arm.dof(); ++i) {
    const auto& f = frames[static_cast<std::size_t>(i)];
    const Vector3<Scalar> z = f.linear().col(2);
    j.template block<3, 1>(0, i) = z.cross(p - f.translation());
    j.template block<3, 1>(3, i) = z;
  }
  return j;
}

}  // namespace avo
