#pragma once

#include <vector>

#include "mipslam/image.hpp"
#include "mipslam/lie.hpp"

namespace mipslam {

double compute_mse(const Image& a, const Image& b);

struct Psnr {
  double db = 0.0;
  bool infinite = false;  // identical images
};

/// 10 log10(1 / MSE) for images in [0, 1].
Psnr compute_psnr(const Image& a, const Image& b);

/// Mean SSIM over every full 11x11 Gaussian window (sigma 1.5) of the
/// luminance, C1 = 0.01^2, C2 = 0.03^2.
double compute_ssim(const Image& a, const Image& b);

/// Rigid transform T minimising sum |truth_i - T est_i|^2 (no scale).
SE3 align_rigid(const std::vector<Vec3>& est, const std::vector<Vec3>& truth);

/// Translation RMSE after rigid alignment of the estimate onto the truth.
double compute_ate(const std::vector<SE3>& estimate, const std::vector<SE3>& truth);

}  // namespace mipslam
