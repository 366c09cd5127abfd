#include <doctest.h>

#include <random>

#include <Eigen/Geometry>

#include "mipslam/metrics.hpp"
#include "test_helpers.hpp"

using namespace mipslam;

namespace {

Image random_image(std::mt19937_64& rng, int w, int h, int c) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(w, h, c);
  for (double& v : img.data) v = u(rng);
  return img;
}

// Translation RMSE for a given rotation with the optimal translation.
double rmse_for_rotation(const Mat3& r, const std::vector<Vec3>& est, const std::vector<Vec3>& truth) {
  Vec3 me = Vec3::Zero(), mt = Vec3::Zero();
  for (std::size_t i = 0; i < est.size(); ++i) {
    me += est[i];
    mt += truth[i];
  }
  me /= static_cast<double>(est.size());
  mt /= static_cast<double>(est.size());
  const Vec3 t = mt - r * me;
  double s = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) s += (truth[i] - r * est[i] - t).squaredNorm();
  return std::sqrt(s / static_cast<double>(est.size()));
}

// Grid over rotation vectors followed by shrinking local search.
double brute_force_ate(const std::vector<Vec3>& est, const std::vector<Vec3>& truth) {
  double best = std::numeric_limits<double>::infinity();
  Vec3 best_w = Vec3::Zero();
  const int g = 12;
  for (int i = -g; i <= g; ++i)
    for (int j = -g; j <= g; ++j)
      for (int k = -g; k <= g; ++k) {
        const Vec3 w = Vec3(i, j, k) * (M_PI / g);
        if (w.norm() > M_PI) continue;
        const double e = rmse_for_rotation(so3_exp(w), est, truth);
        if (e < best) {
          best = e;
          best_w = w;
        }
      }
  double step = M_PI / g;
  while (step > 1e-9) {
    bool moved = false;
    for (int d = 0; d < 3; ++d)
      for (double sgn : {-1.0, 1.0}) {
        Vec3 w = best_w;
        w[d] += sgn * step;
        const double e = rmse_for_rotation(so3_exp(w), est, truth);
        if (e < best) {
          best = e;
          best_w = w;
          moved = true;
        }
      }
    if (!moved) step *= 0.5;
  }
  return best;
}

}  // namespace

TEST_CASE("PSNR examples") {
  std::mt19937_64 rng(1);
  const Image a = random_image(rng, 16, 12, 3);
  const Psnr same = compute_psnr(a, a);
  CHECK(same.infinite);
  CHECK(std::isinf(same.db));

  Image flat(8, 8, 3, 0.5);
  Image off = flat;
  for (double& v : off.data) v += 0.1;
  CHECK(compute_mse(flat, off) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(compute_psnr(flat, off).db == doctest::Approx(20.0).epsilon(1e-9));
  CHECK_FALSE(compute_psnr(flat, off).infinite);

  const Image b = random_image(rng, 16, 12, 3);
  double s = 0.0;
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c) s += std::pow(a.at(x, y, c) - b.at(x, y, c), 2);
  CHECK(compute_psnr(a, b).db == doctest::Approx(10.0 * std::log10(16 * 12 * 3 / s)).epsilon(1e-12));

  CHECK_THROWS_AS(compute_psnr(a, Image(16, 13, 3)), InvalidArgument);
}

TEST_CASE("SSIM examples") {
  std::mt19937_64 rng(2);
  const Image a = random_image(rng, 24, 20, 3);
  CHECK(compute_ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  Image neg = a;
  for (double& v : neg.data) v = 1.0 - v;
  const double s = compute_ssim(a, neg);
  CHECK(s < 1.0);
  CHECK(s < 0.0);
  CHECK(s >= -1.0);

  // constant images: only the luminance term survives
  const Image ca(11, 11, 1, 0.3), cb(11, 11, 1, 0.6);
  const double c1 = 1e-4;
  const double expected = (2 * 0.3 * 0.6 + c1) / (0.09 + 0.36 + c1);
  CHECK(compute_ssim(ca, cb) == doctest::Approx(expected).epsilon(1e-9));

  CHECK_THROWS_AS(compute_ssim(Image(10, 20, 1), Image(10, 20, 1)), InvalidArgument);
}

TEST_CASE("SSIM stays in range on random pairs") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const double s = compute_ssim(random_image(rng, 16, 16, 3), random_image(rng, 16, 16, 3));
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("ATE examples") {
  std::mt19937_64 rng(4);
  std::vector<SE3> truth;
  for (int i = 0; i < 30; ++i) truth.push_back(testing::random_pose(rng, 2.0));
  CHECK(compute_ate(truth, truth) < 1e-12);

  const SE3 g = testing::random_pose(rng, 5.0);
  std::vector<SE3> moved;
  for (const SE3& t : truth) moved.push_back(g * t);
  CHECK(compute_ate(moved, truth) < 1e-12);

  CHECK_THROWS_AS(compute_ate(truth, std::vector<SE3>(truth.begin(), truth.begin() + 5)), InvalidArgument);
  CHECK_THROWS_AS(compute_ate({SE3(), SE3()}, {SE3(), SE3()}), InvalidArgument);
}

TEST_CASE("ATE with one offset pose matches a brute-force alignment search") {
  std::mt19937_64 rng(5);
  std::vector<SE3> truth, est;
  for (int i = 0; i < 12; ++i) truth.push_back(testing::random_pose(rng, 1.0));
  est = truth;
  est[4] = SE3(est[4].rotation(), est[4].translation() + Vec3(0.3, 0.0, 0.0));
  const SE3 g = testing::random_pose(rng, 2.0);
  for (SE3& e : est) e = g * e;
  std::vector<Vec3> pe, pt;
  for (std::size_t i = 0; i < est.size(); ++i) {
    pe.push_back(est[i].translation());
    pt.push_back(truth[i].translation());
  }
  const double ate = compute_ate(est, truth);
  CHECK(ate > 0.0);
  CHECK(ate < 0.3);
  CHECK(std::abs(ate - brute_force_ate(pe, pt)) < 1e-7);

  Eigen::Matrix3Xd src(3, 12), dst(3, 12);
  for (int i = 0; i < 12; ++i) {
    src.col(i) = pe[static_cast<std::size_t>(i)];
    dst.col(i) = pt[static_cast<std::size_t>(i)];
  }
  const Eigen::Matrix4d u = Eigen::umeyama(src, dst, false);
  const SE3 a = align_rigid(pe, pt);
  CHECK((a.rotation() - u.topLeftCorner<3, 3>()).norm() < 1e-9);
  CHECK((a.translation() - u.topRightCorner<3, 1>()).norm() < 1e-9);
}
