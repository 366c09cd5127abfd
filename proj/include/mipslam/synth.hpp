#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mipslam/pose_graph.hpp"
#include "mipslam/rasterizer.hpp"
#include "mipslam/scene.hpp"

namespace mipslam {

enum class TrajectoryShape { kCircle, kLissajous, kLine };

const char* to_string(TrajectoryShape s);
TrajectoryShape trajectory_shape_from_string(const std::string& s);

struct SynthSpec {
  int gaussian_count = 800;
  double extent = 1.5;  // side of the cube holding the centres, meters
  double scale_min = 0.008;
  double scale_max = 0.03;
  double opacity_min = 0.5;
  double opacity_max = 0.95;
  std::uint64_t palette_seed = 7;
  Vec3 background = Vec3(0.05, 0.05, 0.08);

  TrajectoryShape shape = TrajectoryShape::kCircle;
  double radius = 2.5;
  double camera_height = 0.3;
  int pose_count = 100;
  double sigma_t = 0.01;             // meters
  double sigma_r = 0.5 * 3.14159265358979323846 / 180.0;  // radians
  double frame_interval = 0.1;       // seconds
  int loop_count = 5;

  double fx = 220.0;
  double fy = 220.0;
  int width = 256;
  int height = 256;

  void validate() const;
};

Scene generate_synthetic_scene(const SynthSpec& spec, std::uint64_t seed);

/// Camera with the spec's intrinsics centred on the image.
Camera make_camera(const SynthSpec& spec, const SE3& pose);

/// Camera-to-world pose at `eye` looking at `target`, z up in the world.
SE3 look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

struct GroundTruth {
  Image color;
  Image depth;
};

/// Point-sampled render of the unfiltered scene at supersample x the
/// resolution, box-downsampled back. Independent of the quadrature code.
GroundTruth render_ground_truth(const Scene& scene, const Camera& cam, int supersample = 4, int threads = 1);

struct SyntheticTrajectory {
  std::vector<SE3> truth;
  std::vector<double> timestamps;
  std::vector<PoseEdge> odometry;  // i -> i + 1
  std::vector<PoseEdge> loops;     // exact
};

/// Odometry information diag(1/sigma_t^2, 1/sigma_r^2) with sigmas floored
/// at 1e-3.
Mat6 odometry_information(const SynthSpec& spec);

SyntheticTrajectory generate_trajectory(const SynthSpec& spec, std::uint64_t seed);

/// Index pairs (k N/10, N - 1 - k N/10) for k < count, without duplicates
/// or pairs closer than two indices.
std::vector<std::pair<int, int>> loop_pairs(int pose_count, int count);

/// Composes relative measurements from `start`.
std::vector<SE3> dead_reckon(const SE3& start, const std::vector<PoseEdge>& odometry);

/// Nodes at `initial`, ids 0..N-1, plus the given edges.
PoseGraph make_pose_graph(const std::vector<SE3>& initial, const std::vector<double>& timestamps,
                          const std::vector<PoseEdge>& edges);

/// Largest fx / depth over the cameras that see each Gaussian.
void assign_sampling_frequencies(Scene& scene, const std::vector<Camera>& cameras,
                                 double near_plane = kDefaultNearPlane);

/// Adds +/- amplitude alternately along the x axis of every pose's position.
std::vector<SE3> add_alternating_jitter(const std::vector<SE3>& poses, double amplitude);

}  // namespace mipslam
