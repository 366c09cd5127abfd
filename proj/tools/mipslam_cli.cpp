// mipslam command-line tool. Exit codes: 0 success, 2 invalid input,
// 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mipslam/benchmark.hpp"
#include "mipslam/config.hpp"
#include "mipslam/io.hpp"
#include "mipslam/metrics.hpp"
#include "mipslam/pipeline.hpp"
#include "mipslam/sapgo.hpp"
#include "mipslam/synth.hpp"

namespace fs = std::filesystem;
using namespace mipslam;
using nlohmann::json;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitNumerical = 3;

PipelineConfig load_or_default(const std::string& path) {
  return path.empty() ? default_pipeline_config() : load_config(path);
}

std::vector<Camera> trajectory_cameras(const SynthSpec& spec, const std::vector<SE3>& poses, int count) {
  std::vector<Camera> cams;
  const std::size_t n = poses.size();
  const std::size_t c = std::min<std::size_t>(static_cast<std::size_t>(std::max(count, 1)), n);
  for (std::size_t i = 0; i < c; ++i) cams.push_back(make_camera(spec, poses[i * n / c]));
  return cams;
}

struct SynthArgs {
  std::string config, out = "synth_out";
  std::uint64_t seed = 1;
  int views = 4;
};

int run_synth(const SynthArgs& a) {
  PipelineConfig cfg = load_or_default(a.config);
  const SynthSpec& spec = cfg.synth;
  fs::create_directories(a.out);
  const Scene scene = generate_synthetic_scene(spec, a.seed);
  const SyntheticTrajectory traj = generate_trajectory(spec, a.seed);
  write_json(fs::path(a.out) / "scene.json", to_json(scene));
  std::vector<StampedPose> truth;
  for (std::size_t i = 0; i < traj.truth.size(); ++i) truth.push_back({traj.timestamps[i], traj.truth[i]});
  write_tum(fs::path(a.out) / "truth.tum", truth);

  std::vector<PoseEdge> edges = traj.odometry;
  edges.insert(edges.end(), traj.loops.begin(), traj.loops.end());
  write_g2o(fs::path(a.out) / "graph.g2o",
            make_pose_graph(dead_reckon(traj.truth[0], traj.odometry), traj.timestamps, edges));

  json cams = json::array();
  const std::vector<Camera> views = trajectory_cameras(spec, traj.truth, a.views);
  for (std::size_t v = 0; v < views.size(); ++v) {
    const GroundTruth gt = render_ground_truth(scene, views[v], cfg.pipeline.supersample, cfg.render.threads);
    char name[64];
    std::snprintf(name, sizeof name, "view_%03zu", v);
    write_ppm(fs::path(a.out) / (std::string(name) + ".ppm"), gt.color);
    write_depth(fs::path(a.out) / (std::string(name) + ".mipd"), gt.depth);
    write_json(fs::path(a.out) / (std::string(name) + "_camera.json"), to_json(views[v]));
    cams.push_back(to_json(views[v]));
  }
  write_json(fs::path(a.out) / "cameras.json", cams);
  std::printf("%-10s %zu\n%-10s %zu\n%-10s %zu\n%-10s %s\n", "gaussians", scene.gaussians.size(), "poses",
              traj.truth.size(), "views", views.size(), "out", a.out.c_str());
  return 0;
}

struct RenderArgs {
  std::string scene, camera, out = "render", mode = "eaa";
  double scale = 1.0;
  std::uint64_t seed = 0;
  int threads = 0;
  bool no_filter = false;
};

int run_render(const RenderArgs& a) {
  const Scene scene = scene_from_json(read_json(a.scene));
  const Camera cam = camera_from_json(read_json(a.camera)).scaled(a.scale);
  RenderConfig cfg;
  cfg.alpha_mode = alpha_mode_from_string(a.mode);
  cfg.quadrature.deterministic_seed = a.seed;
  cfg.threads = a.threads;
  cfg.apply_filter = !a.no_filter;
  const RenderedFrame f = render(scene, cam, cfg);
  write_ppm(a.out + ".ppm", f.color);
  write_depth(a.out + "_depth.mipd", f.depth);
  write_text_matrix(a.out + "_alpha.txt", f.alpha);
  std::printf("%-8s %s\n%-8s %dx%d\n%-8s %s\n", "mode", to_string(cfg.alpha_mode), "size", cam.width,
              cam.height, "out", a.out.c_str());
  return 0;
}

struct QuadArgs {
  int cases = 200;
  std::uint64_t seed = 1;
  std::vector<int> ks = {4, 16, 64};
  int grid = 256;
  std::string out, weighting = "footprint";
};

int run_quad_bench(const QuadArgs& a) {
  QuadratureConfig qc;
  if (a.weighting == "literal") qc.weighting = WeightScheme::kLiteral;
  else if (a.weighting != "footprint") throw InvalidArgument("unknown weighting '" + a.weighting + "'");
  const auto rows = quadrature_benchmark(a.cases, a.seed, a.ks, qc, a.grid);
  std::string tsv = "k\tmean_rel_error\tmax_rel_error\n";
  std::printf("%6s %16s %16s\n", "K", "mean_rel_error", "max_rel_error");
  for (const auto& r : rows) {
    std::printf("%6d %16.6e %16.6e\n", r.k, r.mean_rel_error, r.max_rel_error);
    char line[128];
    std::snprintf(line, sizeof line, "%d\t%.17g\t%.17g\n", r.k, r.mean_rel_error, r.max_rel_error);
    tsv += line;
  }
  if (!a.out.empty()) {
    std::FILE* f = std::fopen(a.out.c_str(), "w");
    if (!f) throw IoError("cannot write " + a.out);
    std::fputs(tsv.c_str(), f);
    std::fclose(f);
  }
  return 0;
}

struct PgoArgs {
  std::string graph, out = "optimized.g2o", report, truth;
  std::optional<double> lambda_spe, lambda_smo, tau_opt, tau_freq;
  int max_iterations = 100;
};

std::vector<SE3> tum_poses(const std::string& path) {
  std::vector<SE3> out;
  for (const StampedPose& p : read_tum(path)) out.push_back(p.pose);
  return out;
}

int run_pgo(const PgoArgs& a) {
  const PoseGraph graph = read_g2o(a.graph);
  SolverConfig cfg;
  cfg.max_iterations = a.max_iterations;
  if (a.tau_opt) cfg.tau_opt = *a.tau_opt;
  if (a.tau_freq) cfg.tau_freq = *a.tau_freq;
  cfg.validate();
  const Adjacency adj = build_adjacency(graph);
  const double fiedler = laplacian_spectrum(normalized_laplacian(adj.a, adj.d)).fiedler;
  const Regularization reg = adapt_regularization(fiedler, cfg);
  const double ls = a.lambda_spe.value_or(reg.lambda_spe);
  const double lm = a.lambda_smo.value_or(reg.lambda_smo);
  require(ls >= 0.0 && lm >= 0.0, "lambdas must be >= 0");
  OptimizeReport rep;
  const PoseGraph out = optimize(graph, ls, lm, cfg, &rep);
  write_g2o(a.out, out);
  json j = {{"nodes", graph.nodes.size()}, {"edges", graph.edges.size()}, {"fiedler", fiedler},
            {"lambda_spe", ls}, {"lambda_smo", lm}, {"tau_freq", reg.tau_freq},
            {"iterations", rep.iterations}, {"objective", rep.objective}, {"final_damping", rep.final_damping},
            {"converged", rep.converged}, {"aborted", rep.aborted}};
  std::printf("%-18s %zu\n%-18s %zu\n%-18s %.6g\n%-18s %.6g\n%-18s %.6g\n%-18s %d\n%-18s %.6e\n%-18s %.6e\n",
              "nodes", graph.nodes.size(), "edges", graph.edges.size(), "fiedler", fiedler, "lambda_spe", ls,
              "lambda_smo", lm, "iterations", rep.iterations, "objective_initial", rep.objective.front(),
              "objective_final", rep.objective.back());
  if (!a.truth.empty()) {
    const std::vector<SE3> truth = tum_poses(a.truth);
    std::vector<SE3> before, after;
    for (const PoseNode& n : graph.nodes) before.push_back(n.pose);
    for (const PoseNode& n : out.nodes) after.push_back(n.pose);
    j["ate_pre"] = compute_ate(before, truth);
    j["ate_post"] = compute_ate(after, truth);
    std::printf("%-18s %.6g\n%-18s %.6g\n", "ate_pre", j["ate_pre"].get<double>(), "ate_post",
                j["ate_post"].get<double>());
  }
  if (!a.report.empty()) write_json(a.report, j);
  if (rep.aborted) {
    std::fprintf(stderr, "pgo: damping exceeded its limit, best estimate written\n");
    return kExitNumerical;
  }
  return 0;
}

int run_eval_ate(const std::string& estimate, const std::string& truth) {
  const double ate = compute_ate(tum_poses(estimate), tum_poses(truth));
  std::printf("ate_rmse %.9g\n", ate);
  return 0;
}

struct BenchArgs {
  std::string config, out = "bench_report.json";
  std::uint64_t seed = 1;
  int cameras = 4;
  std::vector<double> scales = kBenchmarkScales;
};

int run_bench(const BenchArgs& a) {
  PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : load_config(a.config);
  if (a.config.empty()) cfg.render.threads = 0;
  const Scene truth = generate_synthetic_scene(cfg.synth, a.seed);
  const SyntheticTrajectory traj = generate_trajectory(cfg.synth, a.seed);
  const std::vector<Camera> cams = trajectory_cameras(cfg.synth, traj.truth, a.cameras);
  Scene scene = truth;
  assign_sampling_frequencies(scene, cams, cfg.render.near_plane);
  BenchmarkReport r = multiresolution_benchmark(scene, cams, a.scales, cfg.render, cfg.pipeline.supersample);
  r.config = to_json(cfg);
  r.config["seed"] = a.seed;
  write_json(a.out, to_json(r));
  std::fputs(summary_table(r).c_str(), stdout);
  return 0;
}

struct PipelineArgs {
  std::string config, out = "pipeline_out";
  std::optional<std::uint64_t> seed;
};

int run_pipeline_cmd(const PipelineArgs& a) {
  PipelineConfig cfg = load_or_default(a.config);
  if (a.seed) cfg.seed = *a.seed;
  const PipelineResult r = run_pipeline(cfg, a.out);
  std::fputs(summary_table(r.report).c_str(), stdout);
  std::printf("%-12s %.6g m\n", "tracking_ate", r.details["tracking"]["ate"].get<double>());
  for (const auto& [stage, t] : r.timings) std::printf("%-16s %8.3f s\n", stage.c_str(), t);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mipslam: anti-aliased Gaussian splatting SLAM toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic scene, trajectory and ground-truth views");
  c_synth->add_option("--config", synth.config, "JSON config file");
  c_synth->add_option("--seed", synth.seed, "Random seed");
  c_synth->add_option("--views", synth.views, "Ground-truth views to render")->check(CLI::PositiveNumber);
  c_synth->add_option("--out", synth.out, "Output directory");

  RenderArgs rend;
  auto* c_render = app.add_subcommand("render", "Render a scene from a camera");
  c_render->add_option("--scene", rend.scene, "Scene JSON")->required();
  c_render->add_option("--camera", rend.camera, "Camera JSON")->required();
  c_render->add_option("--mode", rend.mode, "Alpha mode")->check(CLI::IsMember({"point", "eaa"}));
  c_render->add_option("--scale", rend.scale, "Resolution and focal scale")->check(CLI::PositiveNumber);
  c_render->add_option("--seed", rend.seed, "Quadrature seed");
  c_render->add_option("--threads", rend.threads, "Worker threads, 0 for all cores");
  c_render->add_flag("--no-filter", rend.no_filter, "Skip the 3D filter");
  c_render->add_option("--out", rend.out, "Output path prefix");

  QuadArgs quad;
  auto* c_quad = app.add_subcommand("quad-bench", "EAA quadrature against the dense reference integral");
  c_quad->add_option("--cases", quad.cases, "Random configurations")->check(CLI::PositiveNumber);
  c_quad->add_option("--seed", quad.seed, "Random seed");
  c_quad->add_option("--k", quad.ks, "Sample counts (perfect squares)");
  c_quad->add_option("--grid", quad.grid, "Dense grid side")->check(CLI::PositiveNumber);
  c_quad->add_option("--weighting", quad.weighting, "footprint or literal");
  c_quad->add_option("--out", quad.out, "Tab-separated output file");

  PgoArgs pgo;
  auto* c_pgo = app.add_subcommand("pgo", "Optimise a g2o pose graph");
  c_pgo->add_option("--graph", pgo.graph, "Input g2o file")->required();
  c_pgo->add_option("--out", pgo.out, "Output g2o file");
  c_pgo->add_option("--report", pgo.report, "JSON report file");
  c_pgo->add_option("--truth", pgo.truth, "Ground-truth TUM trajectory for ATE");
  c_pgo->add_option("--lambda-spe", pgo.lambda_spe, "Spectral edge weight (default: adapted)");
  c_pgo->add_option("--lambda-smo", pgo.lambda_smo, "Smoothness weight (default: adapted)");
  c_pgo->add_option("--tau-opt", pgo.tau_opt, "Fiedler threshold");
  c_pgo->add_option("--tau-freq", pgo.tau_freq, "Coherence threshold");
  c_pgo->add_option("--max-iterations", pgo.max_iterations, "LM iterations")->check(CLI::PositiveNumber);

  std::string ate_est, ate_truth;
  auto* c_ate = app.add_subcommand("eval-ate", "ATE RMSE between two TUM trajectories");
  c_ate->add_option("--estimate", ate_est, "Estimated trajectory")->required();
  c_ate->add_option("--truth", ate_truth, "Ground-truth trajectory")->required();

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench-multires", "Multi-resolution benchmark, EAA vs point sampling");
  c_bench->add_option("--config", bench.config, "JSON config file");
  c_bench->add_option("--seed", bench.seed, "Random seed");
  c_bench->add_option("--cameras", bench.cameras, "Benchmark cameras")->check(CLI::PositiveNumber);
  c_bench->add_option("--scales", bench.scales, "Scale factors");
  c_bench->add_option("--out", bench.out, "JSON report file");

  PipelineArgs pipe;
  auto* c_pipe = app.add_subcommand("pipeline", "End-to-end run from a config file");
  c_pipe->add_option("--config", pipe.config, "JSON config file");
  c_pipe->add_option("--seed", pipe.seed, "Override the config seed");
  c_pipe->add_option("--out", pipe.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*c_synth) return run_synth(synth);
    if (*c_render) return run_render(rend);
    if (*c_quad) return run_quad_bench(quad);
    if (*c_pgo) return run_pgo(pgo);
    if (*c_ate) return run_eval_ate(ate_est, ate_truth);
    if (*c_bench) return run_bench(bench);
    if (*c_pipe) return run_pipeline_cmd(pipe);
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.numerical() ? kExitNumerical : kExitInvalid;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitInvalid;
}
