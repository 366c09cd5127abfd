#include "mipslam/config.hpp"

#include <set>
#include <string>

#include "mipslam/io.hpp"

namespace mipslam {

namespace {

using nlohmann::json;

// Reads the keys of one JSON object, rejecting any it does not know.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw InvalidArgument("config: section '" + name_ + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw InvalidArgument("config: unknown key '" + name_ + "." + it.key() + "'");
  }
  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw InvalidArgument("config: bad value for '" + name_ + "." + key + "'");
    }
  }
  void get_vec3(const char* key, Vec3& out) {
    std::vector<double> v;
    get(key, v);
    if (!j_.contains(key)) return;
    if (v.size() != 3) throw InvalidArgument("config: '" + name_ + "." + key + "' needs 3 numbers");
    out = Vec3(v[0], v[1], v[2]);
  }
  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

const char* weight_scheme_name(WeightScheme w) { return w == WeightScheme::kLiteral ? "literal" : "footprint"; }

WeightScheme weight_scheme_from(const std::string& s) {
  if (s == "literal") return WeightScheme::kLiteral;
  if (s == "footprint") return WeightScheme::kFootprint;
  throw InvalidArgument("config: unknown quadrature weighting '" + s + "'");
}

}  // namespace

void PipelineConfig::validate() const {
  render.validate();
  spectral.validate();
  solver.validate();
  synth.validate();
  require(loss.rgb >= 0.0 && loss.depth >= 0.0, "config: loss weights must be >= 0");
  require(pipeline.track_iters >= 1 && pipeline.refine_iters >= 1, "config: iteration counts must be >= 1");
  require(pipeline.keyframe_interval >= 1 && pipeline.keyframe_window >= 1, "config: bad keyframe settings");
  require(pipeline.supersample >= 1, "config: supersample must be >= 1");
  require(pipeline.bench_cameras >= 1, "config: bench_cameras must be >= 1");
  for (double s : pipeline.bench_scales) require(s > 0.0, "config: benchmark scales must be positive");
}

PipelineConfig default_pipeline_config() {
  PipelineConfig c;
  c.render.threads = 0;
  c.synth.gaussian_count = 400;
  c.synth.pose_count = 64;
  c.synth.width = 96;
  c.synth.height = 96;
  c.synth.fx = 82.5;
  c.synth.fy = 82.5;
  return c;
}

json to_json(const QuadratureConfig& c) {
  return {{"gamma", c.gamma}, {"beta", c.beta}, {"k_min", c.k_min}, {"k_max", c.k_max},
          {"deterministic_seed", c.deterministic_seed}, {"jitter", c.jitter},
          {"weighting", weight_scheme_name(c.weighting)}};
}

json to_json(const RenderConfig& c) {
  return {{"tile_size", c.tile_size}, {"transmittance_cutoff", c.transmittance_cutoff},
          {"alpha_mode", to_string(c.alpha_mode)}, {"near_plane", c.near_plane},
          {"filter_constant", c.filter_constant}, {"apply_filter", c.apply_filter}, {"threads", c.threads}};
}

json to_json(const SpectralConfig& c) {
  return {{"window", c.window}, {"hop", c.hop}, {"eps_reg", c.eps_reg}, {"alpha_t", c.alpha_t},
          {"alpha_r", c.alpha_r}, {"beta_c", c.beta_c}, {"beta_g", c.beta_g},
          {"incremental_rotation", c.incremental_rotation}, {"remove_mean", c.remove_mean}};
}

json to_json(const SolverConfig& c) {
  return {{"tau_opt", c.tau_opt}, {"tau_freq", c.tau_freq}, {"lambda_spe_base", c.lambda_spe_base},
          {"lambda_smo_base", c.lambda_smo_base}, {"clusters", c.clusters}, {"max_iterations", c.max_iterations},
          {"step_tolerance", c.step_tolerance}, {"initial_damping", c.initial_damping},
          {"max_damping", c.max_damping}, {"fd_step", c.fd_step},
          {"candidates_per_cluster", c.candidates_per_cluster}};
}

json to_json(const SynthSpec& c) {
  return {{"gaussian_count", c.gaussian_count}, {"extent", c.extent}, {"scale_min", c.scale_min},
          {"scale_max", c.scale_max}, {"opacity_min", c.opacity_min}, {"opacity_max", c.opacity_max},
          {"palette_seed", c.palette_seed}, {"background", {c.background.x(), c.background.y(), c.background.z()}},
          {"shape", to_string(c.shape)}, {"radius", c.radius}, {"camera_height", c.camera_height},
          {"pose_count", c.pose_count}, {"sigma_t", c.sigma_t}, {"sigma_r", c.sigma_r},
          {"frame_interval", c.frame_interval}, {"loop_count", c.loop_count}, {"fx", c.fx}, {"fy", c.fy},
          {"width", c.width}, {"height", c.height}};
}

json to_json(const PipelineConfig& c) {
  const PipelineOptions& p = c.pipeline;
  return {{"seed", c.seed},
          {"render", to_json(c.render)},
          {"quadrature", to_json(c.render.quadrature)},
          {"spectral", to_json(c.spectral)},
          {"solver", to_json(c.solver)},
          {"synth", to_json(c.synth)},
          {"loss", {{"rgb", c.loss.rgb}, {"depth", c.loss.depth}}},
          {"pipeline",
           {{"track_iters", p.track_iters}, {"refine_iters", p.refine_iters},
            {"keyframe_interval", p.keyframe_interval}, {"keyframe_window", p.keyframe_window},
            {"supersample", p.supersample}, {"map_center_noise", p.map_center_noise},
            {"map_color_noise", p.map_color_noise}, {"run_benchmark", p.run_benchmark},
            {"bench_scales", p.bench_scales}, {"bench_cameras", p.bench_cameras}}}};
}

PipelineConfig config_from_json(const json& j, const PipelineConfig& base) {
  PipelineConfig c = base;
  {
    Section top(j, "<root>");
    top.get("seed", c.seed);
    if (const json* s = top.sub("render")) {
      Section r(*s, "render");
      r.get("tile_size", c.render.tile_size);
      r.get("transmittance_cutoff", c.render.transmittance_cutoff);
      std::string mode = to_string(c.render.alpha_mode);
      r.get("alpha_mode", mode);
      c.render.alpha_mode = alpha_mode_from_string(mode);
      r.get("near_plane", c.render.near_plane);
      r.get("filter_constant", c.render.filter_constant);
      r.get("apply_filter", c.render.apply_filter);
      r.get("threads", c.render.threads);
    }
    if (const json* s = top.sub("quadrature")) {
      Section q(*s, "quadrature");
      QuadratureConfig& qc = c.render.quadrature;
      q.get("gamma", qc.gamma);
      q.get("beta", qc.beta);
      q.get("k_min", qc.k_min);
      q.get("k_max", qc.k_max);
      q.get("deterministic_seed", qc.deterministic_seed);
      q.get("jitter", qc.jitter);
      std::string w = weight_scheme_name(qc.weighting);
      q.get("weighting", w);
      qc.weighting = weight_scheme_from(w);
    }
    if (const json* s = top.sub("spectral")) {
      Section q(*s, "spectral");
      q.get("window", c.spectral.window);
      q.get("hop", c.spectral.hop);
      q.get("eps_reg", c.spectral.eps_reg);
      q.get("alpha_t", c.spectral.alpha_t);
      q.get("alpha_r", c.spectral.alpha_r);
      q.get("beta_c", c.spectral.beta_c);
      q.get("beta_g", c.spectral.beta_g);
      q.get("incremental_rotation", c.spectral.incremental_rotation);
      q.get("remove_mean", c.spectral.remove_mean);
    }
    if (const json* s = top.sub("solver")) {
      Section q(*s, "solver");
      SolverConfig& sc = c.solver;
      q.get("tau_opt", sc.tau_opt);
      q.get("tau_freq", sc.tau_freq);
      q.get("lambda_spe_base", sc.lambda_spe_base);
      q.get("lambda_smo_base", sc.lambda_smo_base);
      q.get("clusters", sc.clusters);
      q.get("max_iterations", sc.max_iterations);
      q.get("step_tolerance", sc.step_tolerance);
      q.get("initial_damping", sc.initial_damping);
      q.get("max_damping", sc.max_damping);
      q.get("fd_step", sc.fd_step);
      q.get("candidates_per_cluster", sc.candidates_per_cluster);
    }
    if (const json* s = top.sub("synth")) {
      Section q(*s, "synth");
      SynthSpec& sp = c.synth;
      q.get("gaussian_count", sp.gaussian_count);
      q.get("extent", sp.extent);
      q.get("scale_min", sp.scale_min);
      q.get("scale_max", sp.scale_max);
      q.get("opacity_min", sp.opacity_min);
      q.get("opacity_max", sp.opacity_max);
      q.get("palette_seed", sp.palette_seed);
      q.get_vec3("background", sp.background);
      std::string shape = to_string(sp.shape);
      q.get("shape", shape);
      sp.shape = trajectory_shape_from_string(shape);
      q.get("radius", sp.radius);
      q.get("camera_height", sp.camera_height);
      q.get("pose_count", sp.pose_count);
      q.get("sigma_t", sp.sigma_t);
      q.get("sigma_r", sp.sigma_r);
      q.get("frame_interval", sp.frame_interval);
      q.get("loop_count", sp.loop_count);
      q.get("fx", sp.fx);
      q.get("fy", sp.fy);
      q.get("width", sp.width);
      q.get("height", sp.height);
    }
    if (const json* s = top.sub("loss")) {
      Section q(*s, "loss");
      q.get("rgb", c.loss.rgb);
      q.get("depth", c.loss.depth);
    }
    if (const json* s = top.sub("pipeline")) {
      Section q(*s, "pipeline");
      PipelineOptions& p = c.pipeline;
      q.get("track_iters", p.track_iters);
      q.get("refine_iters", p.refine_iters);
      q.get("keyframe_interval", p.keyframe_interval);
      q.get("keyframe_window", p.keyframe_window);
      q.get("supersample", p.supersample);
      q.get("map_center_noise", p.map_center_noise);
      q.get("map_color_noise", p.map_color_noise);
      q.get("run_benchmark", p.run_benchmark);
      q.get("bench_scales", p.bench_scales);
      q.get("bench_cameras", p.bench_cameras);
    }
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json(path)); }

}  // namespace mipslam
