#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <random>

#include "mipslam/projection.hpp"
#include "mipslam/synth.hpp"
#include "test_helpers.hpp"

using namespace mipslam;

namespace {

Camera test_camera(double f = 300.0, int w = 200, int h = 160) {
  Camera cam;
  cam.fx = cam.fy = f;
  cam.cx = w / 2.0;
  cam.cy = h / 2.0;
  cam.width = w;
  cam.height = h;
  return cam;
}

}  // namespace

TEST_CASE("on-axis isotropic projection follows similar triangles") {
  const Camera cam = test_camera();
  for (double d : {1.0, 2.5, 7.0}) {
    Gaussian3D g;
    g.center = Vec3(0, 0, d);
    g.scales = Vec3::Constant(0.005);
    const auto p = project_gaussian(g, cam);
    REQUIRE(p);
    const double expect = std::pow(cam.fx * 0.005 / d, 2);
    CHECK(testing::rel_err(p->cov2d(0, 0), expect) < 0.01);
    CHECK(testing::rel_err(p->cov2d(1, 1), expect) < 0.01);
    CHECK(std::abs(p->cov2d(0, 1)) < 1e-12);
    CHECK(p->mean2d.isApprox(Vec2(cam.cx, cam.cy)));
    CHECK(p->depth == d);
  }
}

TEST_CASE("Gaussians behind or at the near plane are culled") {
  const Camera cam = test_camera();
  Gaussian3D g;
  g.center = Vec3(0, 0, -1.0);
  CHECK_FALSE(project_gaussian(g, cam));
  g.center = Vec3(0, 0, 0.005);
  CHECK_FALSE(project_gaussian(g, cam));
  g.center = Vec3(0, 0, 0.5);
  CHECK(project_gaussian(g, cam));
}

TEST_CASE("Gaussians far outside the image are culled") {
  const Camera cam = test_camera();
  Gaussian3D g;
  g.scales = Vec3::Constant(0.001);
  g.center = Vec3(5.0, 0, 1.0);  // projects ~1400 px to the right
  CHECK_FALSE(project_gaussian(g, cam));
  g.scales = Vec3::Constant(2.0);  // huge footprint reaches back into the frame
  CHECK(project_gaussian(g, cam));
}

TEST_CASE("off-axis anisotropic projection matches a Monte Carlo oracle") {
  Camera cam = test_camera(250.0);
  std::mt19937_64 rng(42);
  cam.pose = look_at(Vec3(0.4, -0.3, -2.0), Vec3(0.3, 0.25, 1.0));
  Gaussian3D g;
  g.center = Vec3(0.5, 0.3, 1.2);
  g.orientation = testing::random_quat(rng);
  g.scales = Vec3(0.04, 0.015, 0.008);
  const auto p = project_gaussian(g, cam);
  REQUIRE(p);

  const Mat3 l = g.covariance().llt().matrixL();
  std::normal_distribution<double> n(0.0, 1.0);
  const SE3 w2c = cam.pose.inverse();
  const int count = 100000;
  std::vector<Vec2> pts;
  Vec2 mean = Vec2::Zero();
  for (int i = 0; i < count; ++i) {
    const Vec3 x = w2c * (g.center + l * Vec3(n(rng), n(rng), n(rng)));
    const Vec2 u(cam.fx * x.x() / x.z() + cam.cx, cam.fy * x.y() / x.z() + cam.cy);
    pts.push_back(u);
    mean += u;
  }
  mean /= count;
  Mat2 cov = Mat2::Zero();
  for (const Vec2& u : pts) cov += (u - mean) * (u - mean).transpose();
  cov /= count - 1;
  CHECK((cov - p->cov2d).norm() / cov.norm() < 0.05);
  CHECK((mean - p->mean2d).norm() < 0.05 * std::sqrt(cov.trace()));
}

TEST_CASE("projected covariance stays symmetric positive definite") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> ls(std::log(1e-6), std::log(0.5));
  const Camera cam = test_camera();
  int projected = 0;
  for (int i = 0; i < 1000; ++i) {
    Gaussian3D g;
    g.center = Vec3(u(rng), u(rng), 2.0 + u(rng));
    g.orientation = testing::random_quat(rng);
    g.scales = Vec3(std::exp(ls(rng)), std::exp(ls(rng)), std::exp(ls(rng)));
    const auto p = project_gaussian(g, cam);
    if (!p) continue;
    ++projected;
    CHECK(std::abs(p->cov2d(0, 1) - p->cov2d(1, 0)) <= 1e-12);
    const Eigen::SelfAdjointEigenSolver<Mat2> es(p->cov2d);
    CHECK(es.eigenvalues().minCoeff() >= 1e-8 * (1 - 1e-9));
    CHECK(p->depth > 0.0);
  }
  CHECK(projected > 500);
}

TEST_CASE("update_sampling_frequency examples") {
  const std::vector<FocalDepth> a = {{600, 2.0}};
  CHECK(update_sampling_frequency(0.0, a) == 300.0);
  const std::vector<FocalDepth> b = {{600, 4.0}};
  CHECK(update_sampling_frequency(300.0, b) == 300.0);
  const std::vector<FocalDepth> c = {{600, 2.0}, {500, 1.0}};
  CHECK(update_sampling_frequency(100.0, c) == 500.0);
  CHECK(update_sampling_frequency(42.0, {}) == 42.0);
  const std::vector<FocalDepth> bad = {{600, 0.0}};
  CHECK_THROWS_AS(update_sampling_frequency(0.0, bad), InvalidArgument);
}

TEST_CASE("update_sampling_frequency is monotone and idempotent") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> f(100.0, 1000.0), d(0.1, 10.0), p(0.0, 5000.0);
  std::uniform_int_distribution<int> len(0, 12);
  for (int i = 0; i < 1000; ++i) {
    std::vector<FocalDepth> obs(static_cast<std::size_t>(len(rng)));
    for (auto& o : obs) o = {f(rng), d(rng)};
    const double p0 = p(rng), p1 = p0 + p(rng);
    const double a = update_sampling_frequency(p0, obs);
    const double b = update_sampling_frequency(p1, obs);
    CHECK(a >= p0);
    CHECK(b >= a);
    CHECK(update_sampling_frequency(a, obs) == a);
  }
}

TEST_CASE("3D filter worked example") {
  Gaussian3D g;
  g.scales = Vec3::Constant(0.1);
  g.opacity = 0.8;
  g.sampling_frequency = 10.0;
  const Gaussian3D f = apply_3d_filter(g, 0.2);
  const long double s2 = 0.01L + 0.0004L;
  for (int k = 0; k < 3; ++k) CHECK(std::abs(f.scales[k] * f.scales[k] - static_cast<double>(s2)) < 1e-15);
  const long double expect = 0.8L * std::pow(0.01L / s2, 1.5L);
  CHECK(std::abs(f.opacity - static_cast<double>(expect)) < 1e-15);
}

TEST_CASE("3D filter vanishes as the sampling frequency grows") {
  Gaussian3D g;
  g.scales = Vec3(0.01, 0.02, 0.03);
  g.opacity = 0.7;
  g.sampling_frequency = 1e12;
  const Gaussian3D f = apply_3d_filter(g);
  CHECK((f.scales - g.scales).norm() < 1e-15);
  CHECK(std::abs(f.opacity - g.opacity) < 1e-15);
}

TEST_CASE("3D filter never raises opacity nor shrinks eigenvalues") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ls(std::log(1e-4), std::log(1.0)), nu(0.1, 1e4), op(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    Gaussian3D g;
    g.orientation = testing::random_quat(rng);
    g.scales = Vec3(std::exp(ls(rng)), std::exp(ls(rng)), std::exp(ls(rng)));
    g.opacity = op(rng);
    g.sampling_frequency = nu(rng);
    const Gaussian3D f = apply_3d_filter(g);
    CHECK(f.opacity <= g.opacity);
    CHECK(f.covariance().determinant() >= g.covariance().determinant());
    const Vec3 e0 = Eigen::SelfAdjointEigenSolver<Mat3>(g.covariance()).eigenvalues();
    const Vec3 e1 = Eigen::SelfAdjointEigenSolver<Mat3>(f.covariance()).eigenvalues();
    for (int k = 0; k < 3; ++k) CHECK(e1[k] >= e0[k] * (1 - 1e-12));
  }
}

TEST_CASE("3D filter leaves unobserved Gaussians unchanged") {
  Gaussian3D g;
  g.opacity = 0.4;
  const Gaussian3D f = apply_3d_filter(g);
  CHECK(f.opacity == g.opacity);
  CHECK(f.scales == g.scales);
}

TEST_CASE("covisibility examples") {
  CovisibilityGraph g;
  g = update_covisibility(g, 1, {0, 1, 2});
  CHECK(g.edges().empty());
  CovisibilityGraph d = update_covisibility(g, 2, {5, 6});
  CHECK(d.edges().empty());
  g = update_covisibility(g, 2, {2, 3});
  g = update_covisibility(g, 3, {3, 4});
  CHECK(g.edges().size() == 2);
  CHECK(g.has_edge(1, 2));
  CHECK(g.has_edge(3, 2));
  CHECK_FALSE(g.has_edge(1, 3));
  CHECK_THROWS_AS(update_covisibility(g, 2, {7}), InvalidArgument);
}

TEST_CASE("covisibility edges equal non-empty intersections") {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> count(1, 10), idx(0, 40), sz(0, 6);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = count(rng);
    std::vector<std::set<std::size_t>> vis(static_cast<std::size_t>(n));
    CovisibilityGraph g;
    for (int k = 0; k < n; ++k) {
      const int m = sz(rng);
      for (int j = 0; j < m; ++j) vis[static_cast<std::size_t>(k)].insert(static_cast<std::size_t>(idx(rng)));
      g = update_covisibility(g, k, vis[static_cast<std::size_t>(k)]);
    }
    std::size_t expected = 0;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        bool shared = false;
        for (std::size_t x : vis[static_cast<std::size_t>(a)]) shared |= vis[static_cast<std::size_t>(b)].count(x) > 0;
        CHECK(g.has_edge(a, b) == shared);
        expected += shared ? 1 : 0;
      }
    CHECK(g.edges().size() == expected);
  }
}

TEST_CASE("active window keeps the most recent keyframes") {
  CovisibilityGraph g;
  for (int k = 0; k < 12; ++k) g = update_covisibility(g, k, {static_cast<std::size_t>(k)});
  const auto w = g.active_window(8);
  REQUIRE(w.size() == 8);
  CHECK(w.front() == 4);
  CHECK(w.back() == 11);
}

TEST_CASE("scene sampling frequencies come from window keyframes") {
  Scene scene;
  Gaussian3D g;
  g.center = Vec3(0, 0, 2.0);
  scene.gaussians = {g};
  const Camera cam = test_camera(400.0);
  CovisibilityGraph cg = update_covisibility({}, 0, visible_gaussians(scene, cam));
  std::map<KeyframeId, Camera> cams{{0, cam}};
  update_scene_sampling_frequencies(scene, cg, cams);
  CHECK(scene.gaussians[0].sampling_frequency == doctest::Approx(200.0));
}
