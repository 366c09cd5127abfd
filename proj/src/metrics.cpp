#include "mipslam/metrics.hpp"

#include <cmath>
#include <limits>

#include <Eigen/SVD>

namespace mipslam {

double compute_mse(const Image& a, const Image& b) {
  require(a.same_shape(b), "compute_mse: shape mismatch");
  require(!a.data.empty(), "compute_mse: empty image");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double e = a.data[i] - b.data[i];
    s += e * e;
  }
  return s / static_cast<double>(a.data.size());
}

Psnr compute_psnr(const Image& a, const Image& b) {
  const double mse = compute_mse(a, b);
  if (mse == 0.0) return {std::numeric_limits<double>::infinity(), true};
  return {10.0 * std::log10(1.0 / mse), false};
}

double compute_ssim(const Image& a, const Image& b) {
  require(a.same_shape(b), "compute_ssim: shape mismatch");
  require(a.width >= 11 && a.height >= 11, "compute_ssim: images must be at least 11x11");
  const Image la = a.channels == 3 ? luminance(a) : a;
  const Image lb = b.channels == 3 ? luminance(b) : b;
  require(la.channels == 1, "compute_ssim: expected 1 or 3 channels");

  constexpr int kWin = 11;
  double kernel[kWin][kWin];
  double ksum = 0.0;
  for (int j = 0; j < kWin; ++j)
    for (int i = 0; i < kWin; ++i) {
      const double dx = i - 5.0, dy = j - 5.0;
      kernel[j][i] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
      ksum += kernel[j][i];
    }
  for (auto& row : kernel)
    for (double& v : row) v /= ksum;

  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  double total = 0.0;
  int count = 0;
  for (int y = 0; y + kWin <= la.height; ++y) {
    for (int x = 0; x + kWin <= la.width; ++x) {
      double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
      for (int j = 0; j < kWin; ++j)
        for (int i = 0; i < kWin; ++i) {
          const double w = kernel[j][i];
          const double va = la.at(x + i, y + j);
          const double vb = lb.at(x + i, y + j);
          ma += w * va;
          mb += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * va * vb;
        }
      const double var_a = saa - ma * ma;
      const double var_b = sbb - mb * mb;
      const double cov = sab - ma * mb;
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
      ++count;
    }
  }
  return total / count;
}

SE3 align_rigid(const std::vector<Vec3>& est, const std::vector<Vec3>& truth) {
  require(est.size() == truth.size(), "align_rigid: length mismatch");
  require(!est.empty(), "align_rigid: empty input");
  Vec3 me = Vec3::Zero(), mt = Vec3::Zero();
  for (std::size_t i = 0; i < est.size(); ++i) {
    me += est[i];
    mt += truth[i];
  }
  me /= static_cast<double>(est.size());
  mt /= static_cast<double>(est.size());
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < est.size(); ++i) h += (est[i] - me) * (truth[i] - mt).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 s = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) s(2, 2) = -1.0;
  const Mat3 r = svd.matrixV() * s * svd.matrixU().transpose();
  return {r, mt - r * me};
}

double compute_ate(const std::vector<SE3>& estimate, const std::vector<SE3>& truth) {
  require(estimate.size() == truth.size(), "compute_ate: trajectory length mismatch");
  require(estimate.size() >= 3, "compute_ate: at least 3 poses are required");
  std::vector<Vec3> e, t;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    e.push_back(estimate[i].translation());
    t.push_back(truth[i].translation());
  }
  const SE3 align = align_rigid(e, t);
  double s = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) s += (t[i] - align * e[i]).squaredNorm();
  return std::sqrt(s / static_cast<double>(e.size()));
}

}  // namespace mipslam
