#include "mipslam/lie.hpp"

#include <algorithm>
#include <cmath>

namespace mipslam {

namespace {

// Coefficients of exp: R = I + a W + b W^2, V = I + b W + c W^2.
struct ExpCoefficients {
  double a, b, c;
};

ExpCoefficients exp_coefficients(double theta) {
  const double t2 = theta * theta;
  ExpCoefficients k{};
  if (theta < 1e-8) {
    k.a = 1.0 - t2 / 6.0;
  } else {
    k.a = std::sin(theta) / theta;
  }
  if (theta < 1e-8) {
    k.b = 0.5 - t2 / 24.0;
  } else {
    const double h = std::sin(0.5 * theta);
    k.b = 2.0 * h * h / t2;
  }
  if (theta < 1e-2) {
    const double t4 = t2 * t2;
    k.c = 1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0 - t4 * t2 / 362880.0;
  } else {
    k.c = (theta - std::sin(theta)) / (t2 * theta);
  }
  return k;
}

}  // namespace

Mat3 hat(const Vec3& w) {
  Mat3 m;
  // clang-format off
  m <<  0.0,  -w.z(),  w.y(),
        w.z(),  0.0,  -w.x(),
       -w.y(),  w.x(),  0.0;
  // clang-format on
  return m;
}

Vec3 vee(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

Mat3 so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  const ExpCoefficients k = exp_coefficients(theta);
  const Mat3 w = hat(omega);
  return Mat3::Identity() + k.a * w + k.b * w * w;
}

Vec3 so3_log(const Mat3& r) {
  const Vec3 skew = 0.5 * vee(r - r.transpose());  // sin(theta) * axis
  const double s = skew.norm();
  const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(s, c);

  if (c > -0.99) {
    if (s == 0.0) return Vec3::Zero();
    return (theta / s) * skew;
  }

  // Near pi the skew part vanishes; recover the axis from the symmetric part
  // (R + R^T)/2 = c I + (1 - c) a a^T, using its dominant diagonal entry.
  const Mat3 aat = (0.5 * (r + r.transpose()) - c * Mat3::Identity()) / (1.0 - c);
  Eigen::Index k = 0;
  aat.diagonal().maxCoeff(&k);
  Vec3 axis = aat.col(k) / std::sqrt(std::max(aat(k, k), 1e-300));
  axis.normalize();
  if (axis.dot(skew) < 0.0) axis = -axis;
  return theta * axis;
}

Mat3 so3_left_jacobian(const Vec3& omega) {
  const ExpCoefficients k = exp_coefficients(omega.norm());
  const Mat3 w = hat(omega);
  return Mat3::Identity() + k.b * w + k.c * w * w;
}

SE3 se3_exp(const Twist& xi) {
  if (!xi.allFinite()) throw InvalidArgument("se3_exp: non-finite twist");
  const Vec3 rho = twist_translation(xi);
  const Vec3 omega = twist_rotation(xi);
  const ExpCoefficients k = exp_coefficients(omega.norm());
  const Mat3 w = hat(omega);
  const Mat3 w2 = w * w;
  const Mat3 r = Mat3::Identity() + k.a * w + k.b * w2;
  const Mat3 v = Mat3::Identity() + k.b * w + k.c * w2;
  return {r, v * rho};
}

Twist se3_log(const SE3& t) {
  const Vec3 omega = so3_log(t.rotation());
  const double theta = omega.norm();
  double d = 0.0;
  if (theta < 1e-2) {
    const double t2 = theta * theta;
    d = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  } else {
    const double half = 0.5 * theta;
    d = (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
  }
  const Mat3 w = hat(omega);
  const Mat3 v_inv = Mat3::Identity() - 0.5 * w + d * w * w;
  Twist xi;
  xi.head<3>() = v_inv * t.translation();
  xi.tail<3>() = omega;
  return xi;
}

SE3 SE3::from_quaternion(const Eigen::Quaterniond& q, const Vec3& t) {
  return {q.normalized().toRotationMatrix(), t};
}

SE3 SE3::from_matrix(const Mat4& m) {
  if (!m.allFinite()) throw InvalidArgument("SE3: non-finite matrix");
  const Eigen::RowVector4d last = m.row(3);
  if ((last - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-12)
    throw InvalidArgument("SE3: last row must be [0 0 0 1]");
  SE3 out(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>());
  if (!out.is_valid()) throw InvalidArgument("SE3: rotation block is not orthonormal");
  return out;
}

Eigen::Quaterniond SE3::quaternion() const {
  Eigen::Quaterniond q(rotation_);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return q;
}

Mat4 SE3::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

SE3 SE3::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return {rt, -(rt * translation_)};
}

SE3 SE3::operator*(const SE3& other) const {
  return {rotation_ * other.rotation_, rotation_ * other.translation_ + translation_};
}

bool SE3::is_valid(double tol) const {
  if (!rotation_.allFinite() || !translation_.allFinite()) return false;
  const double ortho = (rotation_.transpose() * rotation_ - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation_.determinant() - 1.0) <= tol;
}

SE3 SE3::normalized() const { return from_quaternion(Eigen::Quaterniond(rotation_), translation_); }

}  // namespace mipslam
