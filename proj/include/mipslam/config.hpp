#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "mipslam/rasterizer.hpp"
#include "mipslam/refine.hpp"
#include "mipslam/sapgo.hpp"
#include "mipslam/synth.hpp"
#include "mipslam/trajectory_spectral.hpp"

namespace mipslam {

struct PipelineOptions {
  int track_iters = 8;
  int refine_iters = 4;
  int keyframe_interval = 4;
  int keyframe_window = kDefaultKeyframeWindow;
  int supersample = 4;
  /// Map initialisation noise relative to the generating scene.
  double map_center_noise = 0.005;
  double map_color_noise = 0.05;
  bool run_benchmark = true;
  std::vector<double> bench_scales = {2.0, 1.0, 0.5, 0.25, 0.125};
  int bench_cameras = 3;
};

/// Everything the pipeline and benchmark read from a config file. JSON
/// sections: seed, render, quadrature, spectral, solver, synth, loss,
/// pipeline. Unknown keys are rejected.
struct PipelineConfig {
  std::uint64_t seed = 1;
  RenderConfig render;
  SpectralConfig spectral;
  SolverConfig solver;
  SynthSpec synth;
  LossWeights loss;
  PipelineOptions pipeline;

  void validate() const;
};

/// Smaller scene and images than SynthSpec's defaults so the full pipeline
/// runs in seconds.
PipelineConfig default_pipeline_config();

nlohmann::json to_json(const QuadratureConfig& c);
nlohmann::json to_json(const RenderConfig& c);
nlohmann::json to_json(const SpectralConfig& c);
nlohmann::json to_json(const SolverConfig& c);
nlohmann::json to_json(const SynthSpec& c);
nlohmann::json to_json(const PipelineConfig& c);

/// Starts from `base` and overrides the keys present in `j`.
PipelineConfig config_from_json(const nlohmann::json& j, const PipelineConfig& base = default_pipeline_config());
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace mipslam
