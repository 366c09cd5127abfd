#pragma once

// Elliptical adaptive anti-aliasing: per-pixel integration of a projected
// Gaussian over the unit pixel footprint, carried out in the Gaussian's
// principal-axis frame with stratified, importance-weighted samples.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mipslam/common.hpp"

namespace mipslam {

inline constexpr double kEigenvalueFloor = 1e-8;

/// Sigma2D = Q diag(eigvals) Q^T, eigvals descending.
struct EigenFrame {
  Mat2 eigvecs = Mat2::Identity();
  Vec2 eigvals = Vec2::Ones();
  double condition_number = 1.0;  // sqrt(lambda1 / lambda2)
};

struct QuadratureSample {
  Vec2 position = Vec2::Zero();          // pixels
  Vec2 principal_coords = Vec2::Zero();  // Q^T (position - mean2d)
  double proposal_density = 1.0;
  double weight = 0.0;
};

/// How the per-sample weights are formed.
///  - kFootprint: w = 1/p. The samples estimate the average of the Gaussian
///    over the pixel footprint, so the estimator converges to the pixel
///    integral as K grows.
///  - kLiteral: w = (q/p) * psi(kappa, x), with q the Gaussian at the sample
///    and psi the anisotropy/boundary enhancement factor. Because q appears
///    in the weight, the normalised sum converges to int(psi g^2)/int(psi g)
///    rather than to the pixel integral; kept for comparison.
enum class WeightScheme { kFootprint, kLiteral };

struct QuadratureConfig {
  double gamma = 0.5;
  double beta = 2.0;  // per pixel unit
  int k_min = 4;
  int k_max = 64;
  std::uint64_t deterministic_seed = 0;
  /// Amplitude of the seeded in-stratum offset, in [0, 1]. 0 places every
  /// sample at its stratum centre; 1 spans the whole stratum.
  double jitter = 0.0;
  WeightScheme weighting = WeightScheme::kFootprint;

  void validate() const;
};

/// Closed-form symmetric 2x2 eigendecomposition. Eigenvalues descending and
/// clamped to kEigenvalueFloor; each eigenvector has its largest-magnitude
/// component positive (first component on ties); isotropic input gives Q = I.
/// Throws InvalidArgument if |c01 - c10| > 1e-9.
EigenFrame eigendecompose_2x2(const Mat2& cov2d);

/// Perfect-square sample count growing with log2(kappa), clamped to
/// [k_min, k_max].
int sample_count(double kappa, const QuadratureConfig& cfg);

/// One sample per cell of a sqrt(K) x sqrt(K) grid over the unit pixel
/// footprint centred on `pixel_center`. Weights are left at zero.
/// Throws InvalidArgument if K is not a perfect square.
std::vector<QuadratureSample> generate_samples(const Vec2& pixel_center, const Vec2& mean2d,
                                               const EigenFrame& frame, int k,
                                               const QuadratureConfig& cfg,
                                               std::uint64_t pixel_index = 0,
                                               std::uint64_t gaussian_index = 0);

/// Euclidean distance from x to the nearest edge of the pixel footprint.
double boundary_distance(const Vec2& x, const Vec2& pixel_center);

/// psi(kappa, x) = (1 + gamma ln kappa) exp(-beta d_b(x)).
double enhancement_factor(double kappa, const Vec2& x, const Vec2& pixel_center,
                          const QuadratureConfig& cfg);

/// Target density q(x) = exp(-1/2 |Lambda^-1/2 v|^2).
double target_density(const Vec2& principal_coords, const EigenFrame& frame);

std::vector<QuadratureSample> importance_weights(std::vector<QuadratureSample> samples,
                                                 const EigenFrame& frame,
                                                 const Vec2& pixel_center,
                                                 const QuadratureConfig& cfg);

/// alpha = opacity * sum_k w_k exp(P_k) / sum_k w_k, P_k = -1/2 v^T Lambda^-1 v.
/// Returns 0 when the total weight is zero.
double integrated_alpha(double opacity, std::span<const QuadratureSample> samples,
                        const EigenFrame& frame);

struct AlphaGradient {
  double d_opacity = 0.0;
  Vec2 d_mean2d = Vec2::Zero();
  /// Entry-wise derivative: d alpha = tr(d_cov2d^T dSigma) for any dSigma.
  Mat2 d_cov2d = Mat2::Zero();
};

/// Gradient of integrated_alpha with the weights held fixed.
AlphaGradient integrated_alpha_gradient(double opacity, std::span<const QuadratureSample> samples,
                                        const EigenFrame& frame, const Vec2& mean2d);

/// Midpoint rule on a grid_n x grid_n grid over the unit pixel footprint.
double dense_reference_integral(const Vec2& pixel_center, const Vec2& mean2d, const Mat2& cov2d,
                                double opacity, int grid_n);

namespace detail {

// R2 low-discrepancy generator constants (plastic number).
inline constexpr double kR2a = 0.7548776662466927;
inline constexpr double kR2b = 0.5698402909980532;

/// Offset of sample `s` inside its stratum, in [0, 1)^2.
inline Vec2 stratum_offset(int s, const QuadratureConfig& cfg, std::uint64_t pixel_index,
                           std::uint64_t gaussian_index) {
  if (cfg.jitter == 0.0) return {0.5, 0.5};
  const std::uint64_t h =
      mix64(cfg.deterministic_seed ^ mix64(pixel_index * 0x9E3779B97F4A7C15ull + gaussian_index));
  const double sx = to_unit_interval(h);
  const double sy = to_unit_interval(mix64(h));
  double ox = sx + s * kR2a;
  double oy = sy + s * kR2b;
  ox -= std::floor(ox);
  oy -= std::floor(oy);
  return {0.5 + cfg.jitter * (ox - 0.5), 0.5 + cfg.jitter * (oy - 0.5)};
}

inline int grid_side(int k) {
  const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(k))));
  return (n >= 1 && n * n == k) ? n : -1;
}

inline Vec2 sample_position(const Vec2& pixel_center, int n, int s, const Vec2& offset) {
  const int i = s % n;
  const int j = s / n;
  return {pixel_center.x() - 0.5 + (i + offset.x()) / n,
          pixel_center.y() - 0.5 + (j + offset.y()) / n};
}

}  // namespace detail

}  // namespace mipslam
