#include "mipslam/projection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>

#include "mipslam/quadrature.hpp"

namespace mipslam {

std::optional<ProjectedGaussian> project_gaussian(const Gaussian3D& g, const Camera& cam,
                                                  double near_plane, std::size_t source_index) {
  const Mat3 w = cam.pose.rotation().transpose();
  const Vec3 pc = w * (g.center - cam.pose.translation());
  const double z = pc.z();
  if (!(z > near_plane)) return std::nullopt;

  const double inv_z = 1.0 / z;
  Eigen::Matrix<double, 2, 3> j;
  j << cam.fx * inv_z, 0.0, -cam.fx * pc.x() * inv_z * inv_z,
      0.0, cam.fy * inv_z, -cam.fy * pc.y() * inv_z * inv_z;
  const Eigen::Matrix<double, 2, 3> jw = j * w;
  Mat2 cov = jw * g.covariance() * jw.transpose();
  cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));

  const EigenFrame frame = eigendecompose_2x2(cov);
  cov = frame.eigvecs * frame.eigvals.asDiagonal() * frame.eigvecs.transpose();
  cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));

  ProjectedGaussian p;
  p.mean2d = Vec2(cam.fx * pc.x() * inv_z + cam.cx, cam.fy * pc.y() * inv_z + cam.cy);
  p.cov2d = cov;
  p.depth = z;
  p.source_index = source_index;
  p.opacity = g.opacity;

  // Distance from the mean to the image rectangle against the 3-sigma radius.
  const double radius = 3.0 * std::sqrt(frame.eigvals.x());
  const double dx = std::max({0.0, -p.mean2d.x(), p.mean2d.x() - cam.width});
  const double dy = std::max({0.0, -p.mean2d.y(), p.mean2d.y() - cam.height});
  if (dx * dx + dy * dy > radius * radius) return std::nullopt;
  return p;
}

double update_sampling_frequency(double prev, std::span<const FocalDepth> observations) {
  double nu = prev;
  for (const FocalDepth& o : observations) {
    require(o.depth > 0.0, "update_sampling_frequency: depth must be positive");
    nu = std::max(nu, o.focal / o.depth);
  }
  return nu;
}

Gaussian3D filtered_or_unchanged(const Gaussian3D& g, double c_f) {
  if (!(g.sampling_frequency > 0.0)) return g;
  const double extra = c_f / g.sampling_frequency;
  const double extra2 = extra * extra;
  Gaussian3D out = g;
  double ratio = 1.0;  // sqrt(det Sigma / det Sigma')
  for (int k = 0; k < 3; ++k) {
    const double s2 = g.scales[k] * g.scales[k];
    const double s2f = s2 + extra2;
    out.scales[k] = std::sqrt(s2f);
    ratio *= std::sqrt(s2 / s2f);
  }
  out.opacity = g.opacity * ratio;
  return out;
}

Gaussian3D apply_3d_filter(const Gaussian3D& g, double c_f) {
  if (!(g.sampling_frequency > 0.0)) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) {
      std::clog << "mipslam: warning: 3D filter skipped for a Gaussian with zero sampling frequency\n";
    }
    return g;
  }
  return filtered_or_unchanged(g, c_f);
}

bool CovisibilityGraph::contains(KeyframeId id) const {
  return std::find(keyframe_ids_.begin(), keyframe_ids_.end(), id) != keyframe_ids_.end();
}

bool CovisibilityGraph::has_edge(KeyframeId a, KeyframeId b) const {
  return edges_.count({std::min(a, b), std::max(a, b)}) > 0;
}

std::vector<KeyframeId> CovisibilityGraph::active_window(int window) const {
  const std::size_t n = keyframe_ids_.size();
  const std::size_t w = static_cast<std::size_t>(std::max(window, 0));
  const std::size_t first = n > w ? n - w : 0;
  return {keyframe_ids_.begin() + static_cast<std::ptrdiff_t>(first), keyframe_ids_.end()};
}

CovisibilityGraph update_covisibility(const CovisibilityGraph& graph, KeyframeId keyframe_id,
                                      const std::set<std::size_t>& visible) {
  if (graph.contains(keyframe_id)) throw InvalidArgument("update_covisibility: duplicate keyframe id");
  CovisibilityGraph out = graph;
  std::set<KeyframeId> neighbours;
  for (std::size_t gi : visible) {
    auto it = out.visibility_.find(gi);
    if (it != out.visibility_.end()) neighbours.insert(it->second.begin(), it->second.end());
  }
  for (KeyframeId other : neighbours)
    out.edges_.insert({std::min(other, keyframe_id), std::max(other, keyframe_id)});
  for (std::size_t gi : visible) out.visibility_[gi].insert(keyframe_id);
  out.keyframe_ids_.push_back(keyframe_id);
  return out;
}

std::set<std::size_t> visible_gaussians(const Scene& scene, const Camera& cam, double near_plane) {
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
    if (project_gaussian(scene.gaussians[i], cam, near_plane, i)) out.insert(i);
  }
  return out;
}

void update_scene_sampling_frequencies(Scene& scene, const CovisibilityGraph& graph,
                                       const std::map<KeyframeId, Camera>& keyframe_cameras,
                                       int window) {
  const std::vector<KeyframeId> active = graph.active_window(window);
  const std::set<KeyframeId> active_set(active.begin(), active.end());
  for (const auto& [gi, seen_by] : graph.visibility()) {
    if (gi >= scene.gaussians.size()) continue;
    Gaussian3D& g = scene.gaussians[gi];
    std::vector<FocalDepth> obs;
    for (KeyframeId kf : seen_by) {
      if (!active_set.count(kf)) continue;
      auto cam_it = keyframe_cameras.find(kf);
      if (cam_it == keyframe_cameras.end()) continue;
      const Camera& cam = cam_it->second;
      const Vec3 pc = cam.pose.inverse() * g.center;
      if (pc.z() > 0.0) obs.push_back({cam.fx, pc.z()});
    }
    g.sampling_frequency = update_sampling_frequency(g.sampling_frequency, obs);
  }
}

}  // namespace mipslam
