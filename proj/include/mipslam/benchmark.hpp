#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mipslam/rasterizer.hpp"
#include "mipslam/scene.hpp"

namespace mipslam {

inline const std::vector<double> kBenchmarkScales = {2.0, 1.0, 0.5, 0.25, 0.125};

struct ScaleMetrics {
  double scale = 1.0;
  AlphaMode mode = AlphaMode::kEaa;
  double mse = 0.0;   // mean over cameras
  double psnr = 0.0;  // of the mean MSE; +inf when flagged
  bool psnr_infinite = false;
  double ssim = 0.0;  // mean over cameras
  double alpha_min = 0.0;  // accumulated opacity range over every pixel
  double alpha_max = 0.0;
};

struct PgoMetrics {
  double ate_pre = 0.0;
  double ate_post = 0.0;
  int iterations = 0;
  double fiedler = 0.0;
  double lambda_spe = 0.0;
  double lambda_smo = 0.0;
  double tau_freq = 0.0;
  int spectral_edges = 0;
  double objective_initial = 0.0;
  double objective_final = 0.0;
  bool converged = false;
};

struct BenchmarkReport {
  std::vector<ScaleMetrics> scales;
  std::optional<PgoMetrics> pgo;
  std::map<std::string, double> runtimes;  // seconds per stage
  nlohmann::json config = nlohmann::json::object();

  const ScaleMetrics* find(double scale, AlphaMode mode) const;
};

nlohmann::json to_json(const BenchmarkReport& r, bool include_runtimes = true);
BenchmarkReport benchmark_report_from_json(const nlohmann::json& j);
bool operator==(const ScaleMetrics& a, const ScaleMetrics& b);
bool operator==(const PgoMetrics& a, const PgoMetrics& b);

/// For every scale, renders each camera (intrinsics and resolution scaled) in
/// point-sample and EAA mode and scores it against the supersampled ground
/// truth of the unfiltered scene. cfg.alpha_mode is ignored.
BenchmarkReport multiresolution_benchmark(const Scene& scene, const std::vector<Camera>& cameras,
                                          const std::vector<double>& scales, const RenderConfig& cfg,
                                          int supersample = 4);

/// Aligned-column table with one row per scale and the EAA - point deltas.
std::string summary_table(const BenchmarkReport& r);

}  // namespace mipslam

namespace mipslam {

/// One seeded pixel/Gaussian configuration: kappa log-uniform in [1, 32],
/// minor eigenvalue log-uniform in [1, 16] px^2, random orientation, mean
/// within Mahalanobis distance 3 of the pixel centre.
struct QuadratureCase {
  Vec2 pixel_center = Vec2(0.5, 0.5);
  Vec2 mean2d = Vec2(0.5, 0.5);
  Mat2 cov2d = Mat2::Identity();
  double opacity = 1.0;
};

QuadratureCase random_quadrature_case(std::uint64_t seed, int index);

struct QuadratureBenchRow {
  int k = 0;
  double mean_rel_error = 0.0;
  double max_rel_error = 0.0;
};

/// integrated_alpha at each fixed K against dense_reference_integral.
std::vector<QuadratureBenchRow> quadrature_benchmark(int cases, std::uint64_t seed, const std::vector<int>& ks,
                                                     const QuadratureConfig& cfg, int dense_grid = 256);

}  // namespace mipslam
