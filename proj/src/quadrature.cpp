#include "mipslam/quadrature.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

namespace mipslam {

namespace {

// Largest-magnitude component positive; near-ties resolved on the first.
Vec2 canonical_sign(Vec2 e) {
  const double ax = std::abs(e.x());
  const double ay = std::abs(e.y());
  const bool use_first = ax >= ay || std::abs(ax - ay) <= 1e-12;
  const double lead = use_first ? e.x() : e.y();
  if (lead < 0.0) e = -e;
  return e;
}

int ceil_square(int v) {
  int n = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(std::max(v, 1)))));
  while (n > 1 && (n - 1) * (n - 1) >= v) --n;
  while (n * n < v) ++n;
  return n * n;
}

int floor_square(int v) {
  int n = static_cast<int>(std::floor(std::sqrt(static_cast<double>(std::max(v, 1)))));
  while ((n + 1) * (n + 1) <= v) ++n;
  while (n > 1 && n * n > v) --n;
  return n * n;
}

double quadratic_form(const Vec2& v, const EigenFrame& frame) {
  return v.x() * v.x() / frame.eigvals.x() + v.y() * v.y() / frame.eigvals.y();
}

}  // namespace

void QuadratureConfig::validate() const {
  require(std::isfinite(gamma) && gamma >= 0.0, "QuadratureConfig: gamma must be >= 0");
  require(std::isfinite(beta) && beta >= 0.0, "QuadratureConfig: beta must be >= 0");
  require(k_min >= 1, "QuadratureConfig: k_min must be >= 1");
  require(k_max >= k_min, "QuadratureConfig: k_max must be >= k_min");
  require(ceil_square(k_min) <= k_max,
          "QuadratureConfig: [k_min, k_max] must contain a perfect square");
  require(jitter >= 0.0 && jitter <= 1.0, "QuadratureConfig: jitter must lie in [0, 1]");
}

EigenFrame eigendecompose_2x2(const Mat2& cov2d) {
  require(cov2d.allFinite(), "eigendecompose_2x2: non-finite input");
  require(std::abs(cov2d(0, 1) - cov2d(1, 0)) <= 1e-9, "eigendecompose_2x2: matrix is not symmetric");
  const double a = cov2d(0, 0);
  const double d = cov2d(1, 1);
  const double b = 0.5 * (cov2d(0, 1) + cov2d(1, 0));
  const double mean = 0.5 * (a + d);
  const double radius = std::hypot(0.5 * (a - d), b);

  EigenFrame f;
  f.eigvals = Vec2(mean + radius, mean - radius);
  if (radius == 0.0) {
    f.eigvecs = Mat2::Identity();
  } else {
    const double phi = 0.5 * std::atan2(2.0 * b, a - d);
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    f.eigvecs.col(0) = canonical_sign(Vec2(c, s));
    f.eigvecs.col(1) = canonical_sign(Vec2(-s, c));
  }
  f.eigvals = f.eigvals.cwiseMax(kEigenvalueFloor);
  f.condition_number = std::sqrt(f.eigvals.x() / f.eigvals.y());
  return f;
}

int sample_count(double kappa, const QuadratureConfig& cfg) {
  const int lo = ceil_square(cfg.k_min);
  const int hi = floor_square(cfg.k_max);
  if (!(kappa >= 1.0)) kappa = 1.0;
  if (!std::isfinite(kappa)) return hi;
  const double octaves = std::floor(std::log2(kappa));
  const double base = cfg.k_min * (1.0 + octaves);
  if (base >= hi) return hi;
  return std::clamp(ceil_square(static_cast<int>(std::ceil(base))), lo, hi);
}

std::vector<QuadratureSample> generate_samples(const Vec2& pixel_center, const Vec2& mean2d,
                                               const EigenFrame& frame, int k,
                                               const QuadratureConfig& cfg,
                                               std::uint64_t pixel_index,
                                               std::uint64_t gaussian_index) {
  const int n = detail::grid_side(k);
  require(n > 0, "generate_samples: K must be a perfect square");
  std::vector<QuadratureSample> out(static_cast<std::size_t>(k));
  const Mat2 qt = frame.eigvecs.transpose();
  for (int s = 0; s < k; ++s) {
    QuadratureSample& smp = out[static_cast<std::size_t>(s)];
    const Vec2 offset = detail::stratum_offset(s, cfg, pixel_index, gaussian_index);
    smp.position = detail::sample_position(pixel_center, n, s, offset);
    smp.principal_coords = qt * (smp.position - mean2d);
    smp.proposal_density = static_cast<double>(k);
  }
  return out;
}

double boundary_distance(const Vec2& x, const Vec2& pixel_center) {
  const Vec2 d = (x - pixel_center).cwiseAbs();
  return std::max(0.0, 0.5 - std::max(d.x(), d.y()));
}

double enhancement_factor(double kappa, const Vec2& x, const Vec2& pixel_center,
                          const QuadratureConfig& cfg) {
  return (1.0 + cfg.gamma * std::log(kappa)) * std::exp(-cfg.beta * boundary_distance(x, pixel_center));
}

double target_density(const Vec2& principal_coords, const EigenFrame& frame) {
  return std::exp(-0.5 * quadratic_form(principal_coords, frame));
}

std::vector<QuadratureSample> importance_weights(std::vector<QuadratureSample> samples,
                                                 const EigenFrame& frame,
                                                 const Vec2& pixel_center,
                                                 const QuadratureConfig& cfg) {
  for (QuadratureSample& s : samples) {
    if (cfg.weighting == WeightScheme::kLiteral) {
      const double q = target_density(s.principal_coords, frame);
      s.weight = q / s.proposal_density *
                 enhancement_factor(frame.condition_number, s.position, pixel_center, cfg);
    } else {
      s.weight = 1.0 / s.proposal_density;
    }
  }
  return samples;
}

double integrated_alpha(double opacity, std::span<const QuadratureSample> samples,
                        const EigenFrame& frame) {
  double num = 0.0;
  double den = 0.0;
  for (const QuadratureSample& s : samples) {
    num += s.weight * std::exp(-0.5 * quadratic_form(s.principal_coords, frame));
    den += s.weight;
  }
  if (den <= 0.0) return 0.0;
  return opacity * (num / den);
}

AlphaGradient integrated_alpha_gradient(double opacity, std::span<const QuadratureSample> samples,
                                        const EigenFrame& frame, const Vec2& mean2d) {
  AlphaGradient g;
  double den = 0.0;
  double avg = 0.0;
  Vec2 dmu = Vec2::Zero();
  Mat2 dcov = Mat2::Zero();
  const Mat2& q = frame.eigvecs;
  for (const QuadratureSample& s : samples) {
    const Vec2 v = q.transpose() * (s.position - mean2d);
    const double e = std::exp(-0.5 * quadratic_form(v, frame));
    // Sigma^-1 (x - mu) = Q Lambda^-1 v
    const Vec2 u = q * v.cwiseQuotient(frame.eigvals);
    const double we = s.weight * e;
    avg += we;
    dmu += we * u;
    dcov += (0.5 * we) * (u * u.transpose());
    den += s.weight;
  }
  if (den <= 0.0) return g;
  g.d_opacity = avg / den;
  g.d_mean2d = (opacity / den) * dmu;
  g.d_cov2d = (opacity / den) * dcov;
  return g;
}

double dense_reference_integral(const Vec2& pixel_center, const Vec2& mean2d, const Mat2& cov2d,
                                double opacity, int grid_n) {
  require(grid_n >= 1, "dense_reference_integral: grid_n must be >= 1");
  const Mat2 inv = cov2d.inverse();
  const double h = 1.0 / grid_n;
  double sum = 0.0;
  for (int j = 0; j < grid_n; ++j) {
    const double dy = pixel_center.y() - 0.5 + (j + 0.5) * h - mean2d.y();
    double row = 0.0;
    for (int i = 0; i < grid_n; ++i) {
      const double dx = pixel_center.x() - 0.5 + (i + 0.5) * h - mean2d.x();
      const double m = inv(0, 0) * dx * dx + 2.0 * inv(0, 1) * dx * dy + inv(1, 1) * dy * dy;
      row += std::exp(-0.5 * m);
    }
    sum += row;
  }
  return opacity * sum * h * h;
}

}  // namespace mipslam
