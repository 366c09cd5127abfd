#pragma once

#include <Eigen/Geometry>

#include "mipslam/common.hpp"

namespace mipslam {

/// Element of se(3), translation part first: [rho; omega].
using Twist = Vec6;

inline auto twist_translation(const Twist& xi) { return xi.head<3>(); }
inline auto twist_rotation(const Twist& xi) { return xi.tail<3>(); }

/// Rigid transform. Stored as a rotation matrix plus translation; the
/// constructor does not re-check orthonormality (see is_valid / from_matrix).
class SE3 {
 public:
  SE3() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  SE3(const Mat3& rotation, const Vec3& translation)
      : rotation_(rotation), translation_(translation) {}

  static SE3 identity() { return {}; }
  static SE3 from_quaternion(const Eigen::Quaterniond& q, const Vec3& t);
  /// Throws InvalidArgument unless the upper-left block is a rotation within
  /// 1e-9 and the last row is [0 0 0 1].
  static SE3 from_matrix(const Mat4& m);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Eigen::Quaterniond quaternion() const;
  Mat4 matrix() const;

  SE3 inverse() const;
  SE3 operator*(const SE3& other) const;
  Vec3 operator*(const Vec3& p) const { return rotation_ * p + translation_; }

  bool is_valid(double tol = 1e-9) const;
  /// Projects the rotation back onto SO(3) via its quaternion.
  SE3 normalized() const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

Mat3 hat(const Vec3& w);
Vec3 vee(const Mat3& m);

Mat3 so3_exp(const Vec3& omega);
/// Rotation vector with angle in [0, pi].
Vec3 so3_log(const Mat3& r);

/// Throws InvalidArgument on non-finite input.
SE3 se3_exp(const Twist& xi);
Twist se3_log(const SE3& t);

/// Left Jacobian V(omega) of SO(3): translation of exp([rho; omega]) is V * rho.
Mat3 so3_left_jacobian(const Vec3& omega);

}  // namespace mipslam
