#pragma once

#include <Eigen/Geometry>
#include <vector>

#include "mipslam/common.hpp"
#include "mipslam/lie.hpp"

namespace mipslam {

/// One anisotropic primitive. Covariance is O diag(scales)^2 O^T where O is
/// the rotation of `orientation`; scales are standard deviations in meters.
struct Gaussian3D {
  Vec3 center = Vec3::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  Vec3 scales = Vec3::Constant(0.01);
  double opacity = 1.0;
  Vec3 color = Vec3::Constant(0.5);
  /// Largest observed focal/depth ratio (pixels per meter); 0 = never seen.
  double sampling_frequency = 0.0;

  Mat3 rotation() const { return orientation.toRotationMatrix(); }
  Mat3 covariance() const;
  /// Unit-norm quaternion with w >= 0.
  void canonicalize();
};

/// Throws InvalidArgument if any invariant of Gaussian3D is violated.
void validate(const Gaussian3D& g);

/// exp(-1/2 (x - mu)^T Sigma^-1 (x - mu)).
double eval_gaussian3d(const Gaussian3D& g, const Vec3& x);

/// Pinhole camera; pixel (i, j) covers [i, i+1) x [j, j+1), so its centre is
/// (i + 0.5, j + 0.5). `pose` maps camera coordinates to world coordinates;
/// the camera looks along +z with x right and y down.
struct Camera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.5;
  double cy = 0.5;
  int width = 1;
  int height = 1;
  SE3 pose;

  /// Intrinsics and resolution multiplied by `factor` (resolution rounded,
  /// at least 1 pixel).
  Camera scaled(double factor) const;
  SE3 world_to_camera() const { return pose.inverse(); }
};

void validate(const Camera& cam);

struct Scene {
  std::vector<Gaussian3D> gaussians;
  Vec3 background_color = Vec3::Zero();
};

}  // namespace mipslam
