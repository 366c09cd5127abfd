#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "mipslam/common.hpp"
#include "mipslam/scene.hpp"

namespace mipslam {

inline constexpr double kDefaultNearPlane = 0.01;
inline constexpr double kDefaultFilterConstant = 0.2;
inline constexpr int kDefaultKeyframeWindow = 8;

struct ProjectedGaussian {
  Vec2 mean2d = Vec2::Zero();
  Mat2 cov2d = Mat2::Identity();
  double depth = 0.0;
  std::size_t source_index = 0;
  double opacity = 0.0;
};

/// EWA projection: mean2d is the pinhole projection of the camera-frame
/// centre, cov2d = J W Sigma W^T J^T with eigenvalues floored at 1e-8 px^2.
/// Returns nullopt when depth <= near_plane or the 3-sigma circle (sigma from
/// the larger eigenvalue) misses the image rectangle.
std::optional<ProjectedGaussian> project_gaussian(const Gaussian3D& g, const Camera& cam,
                                                  double near_plane = kDefaultNearPlane,
                                                  std::size_t source_index = 0);

struct FocalDepth {
  double focal = 0.0;  // pixels
  double depth = 0.0;  // meters, > 0
};

/// max(prev, max_n f_n / d_n).
double update_sampling_frequency(double prev, std::span<const FocalDepth> observations);

/// Low-pass by the tracked sampling frequency: Sigma' = Sigma + (c_f/nu)^2 I,
/// opacity scaled by sqrt(det Sigma / det Sigma'). A Gaussian that has never
/// been observed (nu = 0) is returned unchanged with a one-time warning.
Gaussian3D apply_3d_filter(const Gaussian3D& g, double c_f = kDefaultFilterConstant);

/// Same as apply_3d_filter but silent for nu = 0 (render path).
Gaussian3D filtered_or_unchanged(const Gaussian3D& g, double c_f);

using KeyframeId = std::int64_t;

class CovisibilityGraph {
 public:
  const std::vector<KeyframeId>& keyframe_ids() const { return keyframe_ids_; }
  const std::set<std::pair<KeyframeId, KeyframeId>>& edges() const { return edges_; }
  const std::map<std::size_t, std::set<KeyframeId>>& visibility() const { return visibility_; }

  bool contains(KeyframeId id) const;
  bool has_edge(KeyframeId a, KeyframeId b) const;
  /// The most recent `window` keyframes, oldest first.
  std::vector<KeyframeId> active_window(int window = kDefaultKeyframeWindow) const;

 private:
  friend CovisibilityGraph update_covisibility(const CovisibilityGraph&, KeyframeId,
                                               const std::set<std::size_t>&);
  std::vector<KeyframeId> keyframe_ids_;
  std::set<std::pair<KeyframeId, KeyframeId>> edges_;  // (min, max)
  std::map<std::size_t, std::set<KeyframeId>> visibility_;
};

/// Adds a keyframe and connects it to every existing keyframe that shares at
/// least one visible Gaussian. Throws InvalidArgument on a duplicate id.
CovisibilityGraph update_covisibility(const CovisibilityGraph& graph, KeyframeId keyframe_id,
                                      const std::set<std::size_t>& visible_gaussians);

/// Indices of Gaussians that survive projection into `cam`.
std::set<std::size_t> visible_gaussians(const Scene& scene, const Camera& cam,
                                        double near_plane = kDefaultNearPlane);

/// Refreshes every Gaussian's sampling frequency from the keyframes of the
/// active window in which it is visible (focal = fx).
void update_scene_sampling_frequencies(Scene& scene, const CovisibilityGraph& graph,
                                       const std::map<KeyframeId, Camera>& keyframe_cameras,
                                       int window = kDefaultKeyframeWindow);

}  // namespace mipslam
