#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <random>

#include "mipslam/scene.hpp"
#include "test_helpers.hpp"

using namespace mipslam;

TEST_CASE("eval_gaussian3d at the centre and one sigma") {
  Gaussian3D g;
  g.center = Vec3(1, 2, 3);
  g.scales = Vec3::Ones();
  CHECK(eval_gaussian3d(g, g.center) == 1.0);
  for (int k = 0; k < 3; ++k)
    CHECK(eval_gaussian3d(g, g.center + Vec3::Unit(k)) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
}

TEST_CASE("eval_gaussian3d matches explicit covariance assembly") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.05, 2.0);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Gaussian3D g;
    g.center = Vec3(n(rng), n(rng), n(rng));
    g.orientation = testing::random_quat(rng);
    g.scales = Vec3(u(rng), u(rng), u(rng));
    const Vec3 x = g.center + Vec3(n(rng), n(rng), n(rng));
    // Independent assembly: R S S R^T from the quaternion formula.
    const Eigen::Quaterniond& q = g.orientation;
    Mat3 r;
    r << 1 - 2 * (q.y() * q.y() + q.z() * q.z()), 2 * (q.x() * q.y() - q.z() * q.w()),
        2 * (q.x() * q.z() + q.y() * q.w()), 2 * (q.x() * q.y() + q.z() * q.w()),
        1 - 2 * (q.x() * q.x() + q.z() * q.z()), 2 * (q.y() * q.z() - q.x() * q.w()),
        2 * (q.x() * q.z() - q.y() * q.w()), 2 * (q.y() * q.z() + q.x() * q.w()),
        1 - 2 * (q.x() * q.x() + q.y() * q.y());
    const Mat3 s2 = g.scales.cwiseProduct(g.scales).asDiagonal();
    const Mat3 cov = r * s2 * r.transpose();
    const Vec3 d = x - g.center;
    const double oracle = std::exp(-0.5 * d.dot(cov.inverse() * d));
    CHECK(testing::rel_err(eval_gaussian3d(g, x), oracle, 1e-300) < 1e-10);
  }
}

TEST_CASE("eval_gaussian3d invariant under joint rotation") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 0.3);
  for (int i = 0; i < 200; ++i) {
    Gaussian3D g;
    g.orientation = testing::random_quat(rng);
    g.scales = Vec3(0.2, 0.5, 1.0);
    const Vec3 d(n(rng), n(rng), n(rng));
    const Eigen::Quaterniond rot = testing::random_quat(rng);
    Gaussian3D h = g;
    h.orientation = (rot * g.orientation).normalized();
    CHECK(std::abs(eval_gaussian3d(g, g.center + d) - eval_gaussian3d(h, h.center + rot * d)) < 1e-12);
  }
}

TEST_CASE("covariance is symmetric positive definite") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    Gaussian3D g;
    g.orientation = testing::random_quat(rng);
    g.scales = Vec3(1e-3, 0.1, 2.0);
    const Mat3 c = g.covariance();
    CHECK((c - c.transpose()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(Eigen::SelfAdjointEigenSolver<Mat3>(c).eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("canonicalize gives unit quaternion with w >= 0") {
  Gaussian3D g;
  g.orientation = Eigen::Quaterniond(-2.0, 0.5, 0.1, -0.3);
  const Mat3 before = Eigen::Quaterniond(g.orientation).normalized().toRotationMatrix();
  g.canonicalize();
  CHECK(std::abs(g.orientation.norm() - 1.0) < 1e-15);
  CHECK(g.orientation.w() >= 0.0);
  CHECK((g.rotation() - before).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("validate rejects broken Gaussians and cameras") {
  Gaussian3D g;
  CHECK_NOTHROW(validate(g));
  Gaussian3D bad = g;
  bad.scales.x() = 0.0;
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
  bad = g;
  bad.opacity = 1.5;
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
  bad = g;
  bad.orientation = Eigen::Quaterniond(1.1, 0, 0, 0);
  CHECK_THROWS_AS(validate(bad), InvalidArgument);
  bad = g;
  bad.sampling_frequency = -1.0;
  CHECK_THROWS_AS(validate(bad), InvalidArgument);

  Camera cam;
  cam.fx = cam.fy = 100;
  cam.width = cam.height = 10;
  CHECK_NOTHROW(validate(cam));
  Camera c2 = cam;
  c2.fx = 0;
  CHECK_THROWS_AS(validate(c2), InvalidArgument);
  c2 = cam;
  c2.width = 0;
  CHECK_THROWS_AS(validate(c2), InvalidArgument);
}

TEST_CASE("Camera::scaled multiplies intrinsics and resolution") {
  Camera cam;
  cam.fx = 200;
  cam.fy = 180;
  cam.cx = 64;
  cam.cy = 48;
  cam.width = 128;
  cam.height = 96;
  const Camera s = cam.scaled(0.25);
  CHECK(s.fx == 50);
  CHECK(s.fy == 45);
  CHECK(s.cx == 16);
  CHECK(s.cy == 12);
  CHECK(s.width == 32);
  CHECK(s.height == 24);
  CHECK_THROWS_AS(cam.scaled(0.0), InvalidArgument);
}
