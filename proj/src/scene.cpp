#include "mipslam/scene.hpp"

#include <algorithm>
#include <cmath>

namespace mipslam {

Mat3 Gaussian3D::covariance() const {
  const Mat3 r = rotation();
  return r * scales.array().square().matrix().asDiagonal() * r.transpose();
}

void Gaussian3D::canonicalize() {
  orientation.normalize();
  if (orientation.w() < 0.0) orientation.coeffs() *= -1.0;
}

void validate(const Gaussian3D& g) {
  require(g.center.allFinite(), "Gaussian3D: non-finite center");
  require(g.scales.allFinite() && (g.scales.array() > 0.0).all(),
          "Gaussian3D: scales must be finite and strictly positive");
  require(std::isfinite(g.opacity) && g.opacity >= 0.0 && g.opacity <= 1.0,
          "Gaussian3D: opacity must lie in [0, 1]");
  require(g.color.allFinite() && (g.color.array() >= 0.0).all() && (g.color.array() <= 1.0).all(),
          "Gaussian3D: color must lie in [0, 1]");
  require(std::abs(g.orientation.norm() - 1.0) <= 1e-9, "Gaussian3D: quaternion must be unit norm");
  require(std::isfinite(g.sampling_frequency) && g.sampling_frequency >= 0.0,
          "Gaussian3D: sampling frequency must be non-negative");
}

double eval_gaussian3d(const Gaussian3D& g, const Vec3& x) {
  // Whiten in the principal frame: Sigma^-1 = O diag(s)^-2 O^T.
  const Vec3 local = g.rotation().transpose() * (x - g.center);
  const double m = local.cwiseQuotient(g.scales).squaredNorm();
  return std::exp(-0.5 * m);
}

Camera Camera::scaled(double factor) const {
  require(factor > 0.0 && std::isfinite(factor), "Camera::scaled: factor must be positive");
  Camera out = *this;
  out.fx = fx * factor;
  out.fy = fy * factor;
  out.cx = cx * factor;
  out.cy = cy * factor;
  out.width = std::max(1, static_cast<int>(std::lround(width * factor)));
  out.height = std::max(1, static_cast<int>(std::lround(height * factor)));
  return out;
}

void validate(const Camera& cam) {
  require(std::isfinite(cam.fx) && cam.fx > 0.0 && std::isfinite(cam.fy) && cam.fy > 0.0,
          "Camera: focal lengths must be positive");
  require(std::isfinite(cam.cx) && std::isfinite(cam.cy), "Camera: non-finite principal point");
  require(cam.width >= 1 && cam.height >= 1, "Camera: resolution must be at least 1x1");
  require(cam.pose.is_valid(1e-9), "Camera: pose rotation is not orthonormal");
}

}  // namespace mipslam
