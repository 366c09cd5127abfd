#include <doctest.h>

#include <filesystem>

#include "mipslam/benchmark.hpp"
#include "mipslam/config.hpp"
#include "mipslam/io.hpp"
#include "mipslam/pipeline.hpp"
#include "mipslam/quadrature.hpp"
#include "mipslam/synth.hpp"

using namespace mipslam;
namespace fs = std::filesystem;

TEST_CASE("config JSON round trip and strict keys") {
  const PipelineConfig base = default_pipeline_config();
  const nlohmann::json j = to_json(base);
  const PipelineConfig back = config_from_json(j);
  CHECK(to_json(back) == j);

  nlohmann::json partial = {{"seed", 5}, {"solver", {{"tau_opt", 0.2}}}};
  const PipelineConfig c = config_from_json(partial);
  CHECK(c.seed == 5);
  CHECK(c.solver.tau_opt == 0.2);
  CHECK(c.solver.tau_freq == base.solver.tau_freq);

  CHECK_THROWS_AS(config_from_json({{"solver", {{"tau_optimal", 0.2}}}}), InvalidArgument);
  CHECK_THROWS_AS(config_from_json({{"unknown", 1}}), InvalidArgument);
  CHECK_THROWS_AS(config_from_json({{"spectral", {{"beta_c", 0.9}}}}), InvalidArgument);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), InvalidArgument);
}

TEST_CASE("benchmark rows, ranges and report round trip") {
  SynthSpec spec;
  spec.gaussian_count = 150;
  spec.width = spec.height = 48;
  spec.fx = spec.fy = 41.25;
  Scene s = generate_synthetic_scene(spec, 2);
  std::vector<Camera> cams = {make_camera(spec, look_at(Vec3(2.5, 0, 0.3), Vec3::Zero())),
                              make_camera(spec, look_at(Vec3(0, 2.5, 0.3), Vec3::Zero()))};
  assign_sampling_frequencies(s, cams);
  RenderConfig cfg;
  BenchmarkReport r = multiresolution_benchmark(s, cams, {1.0, 0.5}, cfg, 2);
  REQUIRE(r.scales.size() == 4);
  REQUIRE(r.find(1.0, AlphaMode::kEaa) != nullptr);
  REQUIRE(r.find(1.0, AlphaMode::kPointSample) != nullptr);
  for (const ScaleMetrics& m : r.scales) {
    CHECK(m.alpha_min >= 0.0);
    CHECK(m.alpha_max <= 1.0);
    CHECK(m.ssim >= -1.0);
    CHECK(m.ssim <= 1.0);
    CHECK((std::isfinite(m.psnr) || m.psnr_infinite));
  }
  r.pgo = PgoMetrics{0.1, 0.05, 7, 0.01, 0.02, 0.03, 0.8, 4, 10.0, 1.0, true};
  r.scales[0].psnr = std::numeric_limits<double>::infinity();
  r.scales[0].psnr_infinite = true;
  r.runtimes["render"] = 1.5;
  const BenchmarkReport back = benchmark_report_from_json(nlohmann::json::parse(to_json(r).dump()));
  REQUIRE(back.scales.size() == r.scales.size());
  for (std::size_t i = 0; i < r.scales.size(); ++i) CHECK(back.scales[i] == r.scales[i]);
  REQUIRE(back.pgo.has_value());
  CHECK(*back.pgo == *r.pgo);
  CHECK(back.runtimes == r.runtimes);
  CHECK(!summary_table(r).empty());
}

TEST_CASE("quadrature benchmark error shrinks with K") {
  QuadratureConfig cfg;
  const auto rows = quadrature_benchmark(20, 3, {4, 16, 64}, cfg, 128);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].mean_rel_error <= rows[0].mean_rel_error);
  CHECK(rows[2].mean_rel_error <= rows[1].mean_rel_error);
  const QuadratureCase a = random_quadrature_case(3, 7), b = random_quadrature_case(3, 7);
  CHECK(a.mean2d == b.mean2d);
  CHECK(a.cov2d == b.cov2d);
}

TEST_CASE("zero-noise pipeline recovers the trajectory") {
  PipelineConfig cfg = default_pipeline_config();
  cfg.synth.sigma_t = cfg.synth.sigma_r = 0.0;
  cfg.synth.pose_count = 40;
  cfg.synth.gaussian_count = 200;
  cfg.pipeline.map_center_noise = cfg.pipeline.map_color_noise = 0.0;
  cfg.pipeline.run_benchmark = false;
  cfg.pipeline.track_iters = 2;
  cfg.pipeline.refine_iters = 1;
  const fs::path out = fs::temp_directory_path() / "mipslam_unit_pipeline_zero";
  fs::remove_all(out);
  const PipelineResult r = run_pipeline(cfg, out);
  REQUIRE(r.report.pgo.has_value());
  CHECK(r.report.pgo->ate_post < 1e-6);
  CHECK(fs::exists(out / "report.json"));
  CHECK(fs::exists(out / "optimized.tum"));
}

TEST_CASE("noisy pipeline does not increase ATE and is deterministic") {
  PipelineConfig cfg = default_pipeline_config();
  cfg.synth.pose_count = 48;
  cfg.synth.gaussian_count = 200;
  cfg.pipeline.run_benchmark = false;
  cfg.pipeline.track_iters = 3;
  cfg.pipeline.refine_iters = 2;
  const fs::path a = fs::temp_directory_path() / "mipslam_unit_pipeline_a";
  const fs::path b = fs::temp_directory_path() / "mipslam_unit_pipeline_b";
  const PipelineResult ra = run_pipeline(cfg, a);
  const PipelineResult rb = run_pipeline(cfg, b);
  REQUIRE(ra.report.pgo.has_value());
  CHECK(ra.report.pgo->ate_post <= ra.report.pgo->ate_pre);
  CHECK(report_json(ra).dump() == report_json(rb).dump());
}

TEST_CASE("pipeline errors are tagged with the stage") {
  PipelineConfig cfg = default_pipeline_config();
  cfg.synth.pose_count = 0;
  try {
    run_pipeline(cfg, fs::temp_directory_path() / "mipslam_unit_pipeline_bad");
    FAIL("expected a StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "config");
    CHECK_FALSE(e.numerical());
    CHECK(std::string(e.what()).rfind("[config] ", 0) == 0);
  }
}
