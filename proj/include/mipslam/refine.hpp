#pragma once

#include <vector>

#include "mipslam/rasterizer.hpp"

namespace mipslam {

struct Keyframe {
  Camera camera;
  Image color;
  Image depth;
};

/// Base step per parameter group; scales are updated in log space and
/// rotations through a right perturbation of the orientation.
struct RefineStepSizes {
  double center = 1e-2;
  double rotation = 1e-1;
  double log_scale = 1e-1;
  double opacity = 1e-1;
  double color = 1e-1;
};

struct RefineOptions {
  int iters = 20;
  RefineStepSizes steps;
  LossWeights loss;
  /// Halvings tried before an iteration is declared stalled.
  int max_backtracks = 30;
};

struct RefineReport {
  std::vector<double> losses;  // initial loss, then one entry per iteration
  int skipped_updates = 0;     // Gaussians dropped for a non-finite gradient
  int rejected_steps = 0;
};

/// Gradient descent on centre, orientation, scales, opacity and colour over
/// the given keyframes with backtracking, so the reported loss never rises.
Scene refine_map(const Scene& scene, const std::vector<Keyframe>& keyframes, const RefineOptions& opts,
                 const RenderConfig& cfg, RefineReport* report = nullptr);

struct TrackOptions {
  int iters = 30;
  LossWeights loss;
  /// Step of the per-Gaussian finite difference on the projection.
  double fd_step = 1e-6;
  double initial_damping = 1e-3;
  int max_non_improving = 10;
};

struct TrackResult {
  SE3 pose;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
  bool diverged = false;
  bool no_progress = false;
};

/// Levenberg-Marquardt over a left perturbation exp(xi) * T of the
/// camera-to-world pose. The residual Jacobian is propagated forward through
/// compositing from finite differences of each Gaussian's projection.
TrackResult track_pose(const Scene& scene, const Image& gt_color, const Image& gt_depth,
                       const Camera& camera_init, const TrackOptions& opts, const RenderConfig& cfg);

/// Residual vector whose squared norm is compute_loss, and its Jacobian with
/// respect to a left pose perturbation, reduced to J^T J and J^T r.
struct PoseNormalEquations {
  double loss = 0.0;
  Mat6 jtj = Mat6::Zero();
  Vec6 jtr = Vec6::Zero();
};

PoseNormalEquations pose_normal_equations(const Scene& scene, const Image& gt_color, const Image& gt_depth,
                                          const Camera& cam, const RenderConfig& cfg,
                                          const LossWeights& w, double fd_step = 1e-6);

}  // namespace mipslam
