#include "mipslam/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace mipslam {

const char* to_string(TrajectoryShape s) {
  switch (s) {
    case TrajectoryShape::kCircle: return "circle";
    case TrajectoryShape::kLissajous: return "lissajous";
    case TrajectoryShape::kLine: return "line";
  }
  return "circle";
}

TrajectoryShape trajectory_shape_from_string(const std::string& s) {
  if (s == "circle") return TrajectoryShape::kCircle;
  if (s == "lissajous") return TrajectoryShape::kLissajous;
  if (s == "line") return TrajectoryShape::kLine;
  throw InvalidArgument("unknown trajectory shape '" + s + "'");
}

void SynthSpec::validate() const {
  require(gaussian_count >= 1, "SynthSpec: gaussian_count must be >= 1");
  require(extent > 0.0, "SynthSpec: extent must be positive");
  require(scale_min > 0.0 && scale_max >= scale_min, "SynthSpec: bad scale range");
  require(opacity_min >= 0.0 && opacity_max <= 1.0 && opacity_max >= opacity_min, "SynthSpec: bad opacity range");
  require((background.array() >= 0.0).all() && (background.array() <= 1.0).all(),
          "SynthSpec: background must lie in [0, 1]");
  require(radius > 0.0, "SynthSpec: radius must be positive");
  require(pose_count >= 1, "SynthSpec: pose_count must be >= 1");
  require(sigma_t >= 0.0 && sigma_r >= 0.0, "SynthSpec: noise levels must be >= 0");
  require(frame_interval > 0.0, "SynthSpec: frame_interval must be positive");
  require(loop_count >= 0, "SynthSpec: loop_count must be >= 0");
  require(fx > 0.0 && fy > 0.0 && width >= 1 && height >= 1, "SynthSpec: bad camera");
}

Scene generate_synthetic_scene(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(mix64(seed));
  std::mt19937_64 palette_rng(mix64(spec.palette_seed ^ 0x5bd1e995ull));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Vec3> palette(8);
  for (Vec3& c : palette) c = Vec3(unit(palette_rng), unit(palette_rng), unit(palette_rng));

  Scene scene;
  scene.background_color = spec.background;
  scene.gaussians.reserve(static_cast<std::size_t>(spec.gaussian_count));
  const double log_lo = std::log(spec.scale_min);
  const double log_hi = std::log(spec.scale_max);
  for (int i = 0; i < spec.gaussian_count; ++i) {
    Gaussian3D g;
    g.center = Vec3(unit(rng) - 0.5, unit(rng) - 0.5, unit(rng) - 0.5) * spec.extent;
    Eigen::Quaterniond q(normal(rng), normal(rng), normal(rng), normal(rng));
    if (q.norm() < 1e-12) q = Eigen::Quaterniond::Identity();
    g.orientation = q.normalized();
    g.canonicalize();
    for (int k = 0; k < 3; ++k) g.scales[k] = std::exp(log_lo + (log_hi - log_lo) * unit(rng));
    g.opacity = spec.opacity_min + (spec.opacity_max - spec.opacity_min) * unit(rng);
    const Vec3& base = palette[static_cast<std::size_t>(rng() % palette.size())];
    const Vec3 jitter(unit(rng) - 0.5, unit(rng) - 0.5, unit(rng) - 0.5);
    g.color = (base + 0.2 * jitter).cwiseMax(0.0).cwiseMin(1.0);
    scene.gaussians.push_back(g);
  }
  return scene;
}

Camera make_camera(const SynthSpec& spec, const SE3& pose) {
  Camera c;
  c.fx = spec.fx;
  c.fy = spec.fy;
  c.width = spec.width;
  c.height = spec.height;
  c.cx = 0.5 * spec.width;
  c.cy = 0.5 * spec.height;
  c.pose = pose;
  return c;
}

SE3 look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  require(x.norm() > 1e-12, "look_at: view direction parallel to up");
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return {r, eye};
}

GroundTruth render_ground_truth(const Scene& scene, const Camera& cam, int supersample, int threads) {
  require(supersample >= 1, "render_ground_truth: supersample must be >= 1");
  RenderConfig cfg;
  cfg.alpha_mode = AlphaMode::kPointSample;
  cfg.apply_filter = false;
  cfg.threads = threads;
  Camera hi = cam;
  hi.fx *= supersample;
  hi.fy *= supersample;
  hi.cx *= supersample;
  hi.cy *= supersample;
  hi.width *= supersample;
  hi.height *= supersample;
  const RenderedFrame f = render(scene, hi, cfg);
  return {box_downsample(f.color, supersample), box_downsample(f.depth, supersample)};
}

Mat6 odometry_information(const SynthSpec& spec) {
  const double st = std::max(spec.sigma_t, 1e-3);
  const double sr = std::max(spec.sigma_r, 1e-3);
  Vec6 d;
  d << Vec3::Constant(1.0 / (st * st)), Vec3::Constant(1.0 / (sr * sr));
  return d.asDiagonal();
}

std::vector<std::pair<int, int>> loop_pairs(int pose_count, int count) {
  std::vector<std::pair<int, int>> out;
  for (int k = 0; k < count; ++k) {
    const int i = k * pose_count / 10;
    const int j = pose_count - 1 - k * pose_count / 10;
    if (j - i >= 2 && std::find(out.begin(), out.end(), std::make_pair(i, j)) == out.end()) out.emplace_back(i, j);
  }
  return out;
}

SyntheticTrajectory generate_trajectory(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  SyntheticTrajectory out;
  const int n = spec.pose_count;
  const double two_pi = 2.0 * std::numbers::pi;
  for (int i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / n;
    Vec3 eye;
    Vec3 target = Vec3::Zero();
    switch (spec.shape) {
      case TrajectoryShape::kCircle:
        eye = Vec3(spec.radius * std::cos(two_pi * s), spec.radius * std::sin(two_pi * s), spec.camera_height);
        break;
      case TrajectoryShape::kLissajous: {
        const double r = spec.radius * (1.0 + 0.15 * std::sin(2.0 * two_pi * s));
        eye = Vec3(r * std::cos(two_pi * s), r * std::sin(two_pi * s),
                   spec.camera_height + 0.2 * spec.radius * std::sin(3.0 * two_pi * s));
        break;
      }
      case TrajectoryShape::kLine:
        eye = Vec3(spec.radius * (s - 0.5), -spec.radius, spec.camera_height);
        target = Vec3(spec.radius * (s - 0.5), 0.0, 0.0);
        break;
    }
    out.truth.push_back(look_at(eye, target));
    out.timestamps.push_back(i * spec.frame_interval);
  }

  std::mt19937_64 rng(mix64(seed ^ 0x7f4a7c15ull));
  std::normal_distribution<double> normal(0.0, 1.0);
  const Mat6 info = odometry_information(spec);
  for (int i = 0; i + 1 < n; ++i) {
    Twist noise;
    for (int k = 0; k < 3; ++k) noise[k] = spec.sigma_t * normal(rng);
    for (int k = 3; k < 6; ++k) noise[k] = spec.sigma_r * normal(rng);
    PoseEdge e;
    e.from = i;
    e.to = i + 1;
    const SE3 rel = out.truth[static_cast<std::size_t>(i)].inverse() * out.truth[static_cast<std::size_t>(i + 1)];
    e.measured = (spec.sigma_t == 0.0 && spec.sigma_r == 0.0) ? rel : (rel * se3_exp(noise)).normalized();
    e.information = info;
    e.kind = EdgeKind::kOdometry;
    out.odometry.push_back(e);
  }
  for (const auto& [i, j] : loop_pairs(n, spec.loop_count)) {
    PoseEdge e;
    e.from = i;
    e.to = j;
    e.measured = out.truth[static_cast<std::size_t>(i)].inverse() * out.truth[static_cast<std::size_t>(j)];
    e.information = info;
    e.kind = EdgeKind::kLoop;
    out.loops.push_back(e);
  }
  return out;
}

std::vector<SE3> dead_reckon(const SE3& start, const std::vector<PoseEdge>& odometry) {
  std::vector<SE3> out{start};
  for (const PoseEdge& e : odometry) out.push_back(out.back() * e.measured);
  return out;
}

PoseGraph make_pose_graph(const std::vector<SE3>& initial, const std::vector<double>& timestamps,
                          const std::vector<PoseEdge>& edges) {
  PoseGraph g;
  for (std::size_t i = 0; i < initial.size(); ++i) {
    PoseNode n;
    n.id = static_cast<int>(i);
    n.pose = initial[i];
    n.timestamp = i < timestamps.size() ? timestamps[i] : static_cast<double>(i);
    g.nodes.push_back(n);
  }
  g.edges = edges;
  return g;
}

void assign_sampling_frequencies(Scene& scene, const std::vector<Camera>& cameras, double near_plane) {
  for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
    Gaussian3D& g = scene.gaussians[i];
    std::vector<FocalDepth> obs;
    for (const Camera& cam : cameras) {
      if (!project_gaussian(g, cam, near_plane, i)) continue;
      const double depth = (cam.pose.inverse() * g.center).z();
      obs.push_back({cam.fx, depth});
    }
    g.sampling_frequency = update_sampling_frequency(g.sampling_frequency, obs);
  }
}

std::vector<SE3> add_alternating_jitter(const std::vector<SE3>& poses, double amplitude) {
  std::vector<SE3> out = poses;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    out[i] = SE3(out[i].rotation(), out[i].translation() + Vec3(sign * amplitude, 0.0, 0.0));
  }
  return out;
}

}  // namespace mipslam
