#include "mipslam/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include "mipslam/descriptors.hpp"
#include "mipslam/io.hpp"
#include "mipslam/metrics.hpp"
#include "mipslam/refine.hpp"
#include "mipslam/sapgo.hpp"
#include "mipslam/synth.hpp"
#include "mipslam/trajectory_spectral.hpp"

namespace mipslam {

using nlohmann::json;

namespace {

class StageRunner {
 public:
  explicit StageRunner(std::map<std::string, double>& timings) : timings_(timings) {}

  template <class F>
  auto operator()(const std::string& name, F&& f) -> decltype(f()) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Charge {
      std::map<std::string, double>& t;
      const std::string& n;
      std::chrono::steady_clock::time_point t0;
      ~Charge() { t[n] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
    } charge{timings_, name, t0};
    try {
      return f();
    } catch (const StageError&) {
      throw;
    } catch (const NumericalError& e) {
      throw StageError(name, e.what(), true);
    } catch (const std::exception& e) {
      throw StageError(name, e.what(), false);
    }
  }

 private:
  std::map<std::string, double>& timings_;
};

// The map starts as the generating scene with seeded noise on centres and
// colours and no sampling frequency.
Scene initial_map(const Scene& truth, const PipelineOptions& p, std::uint64_t seed) {
  std::mt19937_64 rng(mix64(seed ^ 0x9e3779b97f4a7c15ull));
  std::normal_distribution<double> normal(0.0, 1.0);
  Scene map = truth;
  for (Gaussian3D& g : map.gaussians) {
    const Vec3 dc(normal(rng), normal(rng), normal(rng));
    const Vec3 dcol(normal(rng), normal(rng), normal(rng));
    g.center += p.map_center_noise * dc;
    g.color = (g.color + p.map_color_noise * dcol).cwiseMax(0.0).cwiseMin(1.0);
    g.sampling_frequency = 0.0;
  }
  return map;
}

std::vector<StampedPose> stamped(const std::vector<SE3>& poses, const std::vector<double>& ts) {
  std::vector<StampedPose> out;
  for (std::size_t i = 0; i < poses.size(); ++i) out.push_back({ts[i], poses[i]});
  return out;
}

std::vector<Keyframe> window_keyframes(const CovisibilityGraph& covis, const std::map<KeyframeId, Camera>& cams,
                                       const std::vector<GroundTruth>& gt, int window) {
  std::vector<Keyframe> out;
  for (KeyframeId id : covis.active_window(window)) {
    const GroundTruth& g = gt[static_cast<std::size_t>(id)];
    out.push_back({cams.at(id), g.color, g.depth});
  }
  return out;
}

}  // namespace

json report_json(const PipelineResult& r) {
  json j = to_json(r.report, false);
  j["details"] = r.details;
  return j;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out_dir) {
  PipelineResult result;
  StageRunner stage(result.timings);
  stage("config", [&] {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
  });
  const SynthSpec& spec = cfg.synth;
  const PipelineOptions& opt = cfg.pipeline;
  const RenderConfig& rcfg = cfg.render;
  result.report.config = to_json(cfg);
  json& details = result.details;

  // Scene, trajectory and ground-truth frames.
  Scene scene;
  SyntheticTrajectory traj;
  std::vector<GroundTruth> gt;
  stage("generate", [&] {
    scene = generate_synthetic_scene(spec, cfg.seed);
    traj = generate_trajectory(spec, cfg.seed);
    for (const SE3& pose : traj.truth)
      gt.push_back(render_ground_truth(scene, make_camera(spec, pose), opt.supersample, rcfg.threads));
    write_json(out_dir / "scene.json", to_json(scene));
    write_tum(out_dir / "truth.tum", stamped(traj.truth, traj.timestamps));
  });
  const std::size_t n = traj.truth.size();

  // Tracking with interleaved mapping.
  Scene map = initial_map(scene, opt, cfg.seed);
  std::vector<SE3> tracked(n);
  CovisibilityGraph covis;
  std::map<KeyframeId, Camera> kf_cams;
  json track_rows = json::array();
  json refine_rows = json::array();
  int diverged = 0, no_progress = 0;
  TrackOptions topt;
  topt.iters = opt.track_iters;
  topt.loss = cfg.loss;
  RefineOptions ropt;
  ropt.iters = opt.refine_iters;
  ropt.loss = cfg.loss;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      tracked[0] = traj.truth[0];
    } else {
      const TrackResult tr = stage("track", [&] {
        const SE3 init = tracked[i - 1] * traj.odometry[i - 1].measured;
        return track_pose(map, gt[i].color, gt[i].depth, make_camera(spec, init), topt, rcfg);
      });
      tracked[i] = tr.pose;
      diverged += tr.diverged ? 1 : 0;
      no_progress += tr.no_progress ? 1 : 0;
      track_rows.push_back({{"frame", i}, {"initial_loss", tr.initial_loss}, {"final_loss", tr.final_loss},
                            {"iterations", tr.iterations}, {"diverged", tr.diverged},
                            {"no_progress", tr.no_progress}});
    }
    if (i % static_cast<std::size_t>(opt.keyframe_interval) != 0) continue;
    const Camera cam = make_camera(spec, tracked[i]);
    stage("covisibility", [&] {
      const KeyframeId id = static_cast<KeyframeId>(i);
      covis = update_covisibility(covis, id, visible_gaussians(map, cam, rcfg.near_plane));
      kf_cams[id] = cam;
      update_scene_sampling_frequencies(map, covis, kf_cams, opt.keyframe_window);
    });
    stage("refine", [&] {
      RefineReport rep;
      map = refine_map(map, window_keyframes(covis, kf_cams, gt, opt.keyframe_window), ropt, rcfg, &rep);
      refine_rows.push_back({{"keyframe", i}, {"initial_loss", rep.losses.front()},
                             {"final_loss", rep.losses.back()}, {"skipped_updates", rep.skipped_updates},
                             {"rejected_steps", rep.rejected_steps}});
    });
  }
  stage("track", [&] { write_tum(out_dir / "tracked.tum", stamped(tracked, traj.timestamps)); });

  // Pose graph from odometry and loop closures, with descriptors and signatures.
  const std::vector<SE3> initial = dead_reckon(traj.truth[0], traj.odometry);
  PoseGraph graph;
  stage("signatures", [&] {
    std::vector<PoseEdge> edges = traj.odometry;
    edges.insert(edges.end(), traj.loops.begin(), traj.loops.end());
    graph = make_pose_graph(initial, traj.timestamps, edges);
    std::vector<Descriptor> descs;
    for (std::size_t i = 0; i < n; ++i) {
      descs.push_back(extract_descriptor(gt[i].color));
      graph.nodes[i].descriptor = descs.back();
    }
    write_descriptors(out_dir / "descriptors.bin", descs);
    if (static_cast<int>(n) >= cfg.spectral.window) {
      const TrajectorySignatures sigs =
          trajectory_signatures(pose_samples(initial, traj.timestamps, cfg.spectral), cfg.spectral);
      for (std::size_t i = 0; i < n; ++i) graph.nodes[i].signature = sigs.for_pose(i);
      details["signature_windows"] = sigs.windows.size();
    } else {
      details["signature_windows"] = 0;
    }
    write_tum(out_dir / "initial.tum", stamped(initial, traj.timestamps));
  });

  // Candidate edges use the pruning threshold adapted to the initial graph;
  // the final weights come from the graph that includes them.
  Regularization reg;
  double fiedler = 0.0;
  int spectral_edges = 0;
  stage("candidates", [&] {
    const Adjacency adj = build_adjacency(graph);
    const LaplacianSpectrum spec0 = laplacian_spectrum(normalized_laplacian(adj.a, adj.d));
    const int k = std::clamp(cfg.solver.clusters, 1, static_cast<int>(n) - 1);
    const std::vector<int> labels = cluster_nodes(spec0, k);
    const Regularization reg0 = adapt_regularization(spec0.fiedler, cfg.solver);
    CandidateStats stats;
    const std::vector<PoseEdge> cands = select_candidate_edges(graph, labels, reg0.tau_freq, cfg.solver,
                                                               cfg.spectral, odometry_information(spec), &stats);
    graph.edges.insert(graph.edges.end(), cands.begin(), cands.end());
    spectral_edges = static_cast<int>(cands.size());
    details["initial_fiedler"] = spec0.fiedler;
    details["candidates"] = {{"selected", cands.size()}, {"skipped_missing", stats.skipped_missing},
                             {"below_coherence", stats.below_coherence}, {"tau_freq", reg0.tau_freq}};
    write_g2o(out_dir / "graph_initial.g2o", graph);
  });
  stage("regularization", [&] {
    const Adjacency adj = build_adjacency(graph);
    fiedler = laplacian_spectrum(normalized_laplacian(adj.a, adj.d)).fiedler;
    reg = adapt_regularization(fiedler, cfg.solver);
  });

  PoseGraph optimized;
  OptimizeReport orep;
  stage("optimize", [&] {
    optimized = optimize(graph, reg.lambda_spe, reg.lambda_smo, cfg.solver, &orep);
    write_g2o(out_dir / "graph_optimized.g2o", optimized);
  });
  std::vector<SE3> post(n);
  for (std::size_t i = 0; i < n; ++i) post[i] = optimized.nodes[i].pose;
  stage("optimize", [&] { write_tum(out_dir / "optimized.tum", stamped(post, traj.timestamps)); });

  // Keyframe cameras move to the optimised poses and the window is refined again.
  stage("remap", [&] {
    for (auto& [id, cam] : kf_cams) cam = make_camera(spec, post[static_cast<std::size_t>(id)]);
    RefineReport rep;
    map = refine_map(map, window_keyframes(covis, kf_cams, gt, opt.keyframe_window), ropt, rcfg, &rep);
    details["remap"] = {{"initial_loss", rep.losses.front()}, {"final_loss", rep.losses.back()}};
    write_json(out_dir / "map.json", to_json(map));
  });

  stage("metrics", [&] {
    PgoMetrics pm;
    pm.ate_pre = compute_ate(initial, traj.truth);
    pm.ate_post = compute_ate(post, traj.truth);
    pm.iterations = orep.iterations;
    pm.fiedler = fiedler;
    pm.lambda_spe = reg.lambda_spe;
    pm.lambda_smo = reg.lambda_smo;
    pm.tau_freq = reg.tau_freq;
    pm.spectral_edges = spectral_edges;
    pm.objective_initial = orep.objective.empty() ? 0.0 : orep.objective.front();
    pm.objective_final = orep.objective.empty() ? 0.0 : orep.objective.back();
    pm.converged = orep.converged;
    result.report.pgo = pm;
    details["tracking"] = {{"ate", compute_ate(tracked, traj.truth)}, {"diverged", diverged},
                           {"no_progress", no_progress}, {"frames", track_rows}};
    details["refine"] = refine_rows;
    details["keyframes"] = covis.keyframe_ids();
    details["covisibility_edges"] = covis.edges().size();
    details["optimize"] = {{"objective", orep.objective}, {"final_damping", orep.final_damping},
                           {"aborted", orep.aborted}};

    const std::size_t last = n - 1;
    const Camera cam = make_camera(spec, traj.truth[last]);
    RenderConfig rc = rcfg;
    const RenderedFrame eaa = render(map, cam, rc);
    rc.alpha_mode = AlphaMode::kPointSample;
    const RenderedFrame point = render(map, cam, rc);
    write_ppm(out_dir / "frame_gt.ppm", gt[last].color);
    write_ppm(out_dir / "frame_eaa.ppm", eaa.color);
    write_ppm(out_dir / "frame_point.ppm", point.color);
    write_depth(out_dir / "frame_depth.mipd", eaa.depth);
    details["final_frame"] = {{"psnr_eaa", compute_psnr(eaa.color, gt[last].color).db},
                              {"psnr_point", compute_psnr(point.color, gt[last].color).db}};
  });

  if (opt.run_benchmark) {
    stage("benchmark", [&] {
      std::vector<Camera> cams;
      const int count = std::min<int>(opt.bench_cameras, static_cast<int>(n));
      for (int c = 0; c < count; ++c)
        cams.push_back(make_camera(spec, traj.truth[static_cast<std::size_t>(c) * n / static_cast<std::size_t>(count)]));
      BenchmarkReport b = multiresolution_benchmark(map, cams, opt.bench_scales, rcfg, opt.supersample);
      result.report.scales = b.scales;
    });
  }

  result.report.runtimes = result.timings;
  stage("report", [&] {
    write_json(out_dir / "report.json", report_json(result));
    write_json(out_dir / "timings.json", json(result.timings));
  });
  return result;
}

}  // namespace mipslam
