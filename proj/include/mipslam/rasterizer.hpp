#pragma once

#include <vector>

#include "mipslam/image.hpp"
#include "mipslam/projection.hpp"
#include "mipslam/quadrature.hpp"
#include "mipslam/scene.hpp"

namespace mipslam {

enum class AlphaMode { kPointSample, kEaa };

const char* to_string(AlphaMode m);
AlphaMode alpha_mode_from_string(const std::string& s);

struct RenderConfig {
  int tile_size = 16;
  double transmittance_cutoff = 1e-4;
  AlphaMode alpha_mode = AlphaMode::kEaa;
  QuadratureConfig quadrature;
  double near_plane = kDefaultNearPlane;
  double filter_constant = kDefaultFilterConstant;
  bool apply_filter = true;
  /// Worker threads for tile rendering; 0 picks hardware concurrency.
  int threads = 1;

  void validate() const;
};

struct RenderedFrame {
  Image color;  // H x W x 3
  Image depth;  // H x W, sum of z_i a_i T_i (not normalised)
  Image alpha;  // H x W, 1 - final transmittance
  AlphaMode alpha_mode = AlphaMode::kEaa;
};

/// Front-to-back compositing of the depth-sorted projected Gaussians.
/// The output does not depend on tile_size or the thread count.
RenderedFrame render(const Scene& scene, const Camera& cam, const RenderConfig& cfg);

struct LossWeights {
  double rgb = 1.0;
  double depth = 0.1;
};

/// rgb * mean squared colour error + depth * mean squared depth error over
/// pixels whose ground-truth depth is non-zero.
double compute_loss(const RenderedFrame& rendered, const Image& gt_color, const Image& gt_depth,
                    const LossWeights& w = {});

struct GaussianGradient {
  Vec3 d_center = Vec3::Zero();
  /// Right-perturbation gradient: dL = d_rotation . delta for O <- O exp(delta).
  Vec3 d_rotation = Vec3::Zero();
  Vec3 d_scales = Vec3::Zero();
  double d_opacity = 0.0;
  Vec3 d_color = Vec3::Zero();
};

struct RenderGradient {
  double loss = 0.0;
  std::vector<GaussianGradient> gaussians;  // one per scene Gaussian
};

/// Loss and its gradient with respect to every Gaussian parameter, through
/// the filter, projection and compositing. Quadrature weights are constants.
RenderGradient render_gradient(const Scene& scene, const Camera& cam, const Image& gt_color,
                               const Image& gt_depth, const RenderConfig& cfg,
                               const LossWeights& w = {});

namespace detail {

/// Everything the per-pixel loops need about one visible Gaussian.
struct PreparedGaussian {
  std::size_t index = 0;
  ProjectedGaussian proj;
  EigenFrame frame;
  Mat2 inv_cov = Mat2::Identity();
  int k = 1;
  Vec3 color = Vec3::Zero();
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel range
  bool covers(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

/// Filter, project, cull and sort by (depth, index).
std::vector<PreparedGaussian> prepare(const Scene& scene, const Camera& cam, const RenderConfig& cfg);

/// Contribution a_i of a prepared Gaussian at pixel (x, y).
double pixel_alpha(const PreparedGaussian& g, int x, int y, int width, const RenderConfig& cfg);

}  // namespace detail

}  // namespace mipslam
