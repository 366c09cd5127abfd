#include "mipslam/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "mipslam/metrics.hpp"
#include "mipslam/synth.hpp"

namespace mipslam {

using nlohmann::json;

const ScaleMetrics* BenchmarkReport::find(double scale, AlphaMode mode) const {
  for (const ScaleMetrics& m : scales)
    if (m.scale == scale && m.mode == mode) return &m;
  return nullptr;
}

bool operator==(const ScaleMetrics& a, const ScaleMetrics& b) {
  return a.scale == b.scale && a.mode == b.mode && a.mse == b.mse && a.psnr == b.psnr &&
         a.psnr_infinite == b.psnr_infinite && a.ssim == b.ssim && a.alpha_min == b.alpha_min &&
         a.alpha_max == b.alpha_max;
}

bool operator==(const PgoMetrics& a, const PgoMetrics& b) {
  return a.ate_pre == b.ate_pre && a.ate_post == b.ate_post && a.iterations == b.iterations &&
         a.fiedler == b.fiedler && a.lambda_spe == b.lambda_spe && a.lambda_smo == b.lambda_smo &&
         a.tau_freq == b.tau_freq && a.spectral_edges == b.spectral_edges &&
         a.objective_initial == b.objective_initial && a.objective_final == b.objective_final &&
         a.converged == b.converged;
}

json to_json(const BenchmarkReport& r, bool include_runtimes) {
  json rows = json::array();
  for (const ScaleMetrics& m : r.scales) {
    rows.push_back({{"scale", m.scale}, {"mode", to_string(m.mode)}, {"mse", m.mse},
                    {"psnr", m.psnr_infinite ? json(nullptr) : json(m.psnr)}, {"psnr_infinite", m.psnr_infinite},
                    {"ssim", m.ssim}, {"alpha_min", m.alpha_min}, {"alpha_max", m.alpha_max}});
  }
  json out = {{"scales", rows}, {"config", r.config}};
  if (r.pgo) {
    const PgoMetrics& p = *r.pgo;
    out["pgo"] = {{"ate_pre", p.ate_pre}, {"ate_post", p.ate_post}, {"iterations", p.iterations},
                  {"fiedler", p.fiedler}, {"lambda_spe", p.lambda_spe}, {"lambda_smo", p.lambda_smo},
                  {"tau_freq", p.tau_freq}, {"spectral_edges", p.spectral_edges},
                  {"objective_initial", p.objective_initial}, {"objective_final", p.objective_final},
                  {"converged", p.converged}};
  }
  if (include_runtimes) out["runtimes"] = r.runtimes;
  return out;
}

BenchmarkReport benchmark_report_from_json(const json& j) {
  BenchmarkReport r;
  try {
    for (const json& row : j.at("scales")) {
      ScaleMetrics m;
      m.scale = row.at("scale").get<double>();
      m.mode = alpha_mode_from_string(row.at("mode").get<std::string>());
      m.mse = row.at("mse").get<double>();
      m.psnr_infinite = row.at("psnr_infinite").get<bool>();
      m.psnr = m.psnr_infinite ? std::numeric_limits<double>::infinity() : row.at("psnr").get<double>();
      m.ssim = row.at("ssim").get<double>();
      m.alpha_min = row.at("alpha_min").get<double>();
      m.alpha_max = row.at("alpha_max").get<double>();
      r.scales.push_back(m);
    }
    if (j.contains("pgo")) {
      const json& p = j.at("pgo");
      PgoMetrics m;
      m.ate_pre = p.at("ate_pre").get<double>();
      m.ate_post = p.at("ate_post").get<double>();
      m.iterations = p.at("iterations").get<int>();
      m.fiedler = p.at("fiedler").get<double>();
      m.lambda_spe = p.at("lambda_spe").get<double>();
      m.lambda_smo = p.at("lambda_smo").get<double>();
      m.tau_freq = p.at("tau_freq").get<double>();
      m.spectral_edges = p.at("spectral_edges").get<int>();
      m.objective_initial = p.at("objective_initial").get<double>();
      m.objective_final = p.at("objective_final").get<double>();
      m.converged = p.at("converged").get<bool>();
      r.pgo = m;
    }
    if (j.contains("runtimes")) r.runtimes = j.at("runtimes").get<std::map<std::string, double>>();
    if (j.contains("config")) r.config = j.at("config");
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("benchmark report: ") + e.what());
  }
  return r;
}

BenchmarkReport multiresolution_benchmark(const Scene& scene, const std::vector<Camera>& cameras,
                                          const std::vector<double>& scales, const RenderConfig& cfg,
                                          int supersample) {
  require(!cameras.empty(), "multiresolution_benchmark: no cameras");
  require(!scales.empty(), "multiresolution_benchmark: no scales");
  cfg.validate();
  BenchmarkReport report;
  const auto t0 = std::chrono::steady_clock::now();
  for (double s : scales) {
    require(s > 0.0, "multiresolution_benchmark: scales must be positive");
    ScaleMetrics rows[2];
    const AlphaMode modes[2] = {AlphaMode::kPointSample, AlphaMode::kEaa};
    for (int m = 0; m < 2; ++m) {
      rows[m].scale = s;
      rows[m].mode = modes[m];
      rows[m].alpha_min = 1.0;
      rows[m].alpha_max = 0.0;
    }
    for (const Camera& base : cameras) {
      const Camera cam = base.scaled(s);
      const GroundTruth gt = render_ground_truth(scene, cam, supersample, cfg.threads);
      for (int m = 0; m < 2; ++m) {
        RenderConfig rc = cfg;
        rc.alpha_mode = modes[m];
        const RenderedFrame f = render(scene, cam, rc);
        rows[m].mse += compute_mse(f.color, gt.color);
        rows[m].ssim += compute_ssim(f.color, gt.color);
        const auto [lo, hi] = std::minmax_element(f.alpha.data.begin(), f.alpha.data.end());
        rows[m].alpha_min = std::min(rows[m].alpha_min, *lo);
        rows[m].alpha_max = std::max(rows[m].alpha_max, *hi);
      }
    }
    for (ScaleMetrics& row : rows) {
      row.mse /= static_cast<double>(cameras.size());
      row.ssim /= static_cast<double>(cameras.size());
      row.psnr_infinite = row.mse == 0.0;
      row.psnr = row.psnr_infinite ? std::numeric_limits<double>::infinity() : -10.0 * std::log10(row.mse);
      report.scales.push_back(row);
    }
  }
  report.runtimes["benchmark"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string summary_table(const BenchmarkReport& r) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%8s %12s %12s %9s %9s %8s %8s %12s %9s\n", "scale", "mse_point", "mse_eaa",
                "psnr_pt", "psnr_eaa", "ssim_pt", "ssim_eaa", "d_mse", "d_psnr");
  os << buf;
  std::vector<double> seen;
  for (const ScaleMetrics& m : r.scales) {
    if (std::find(seen.begin(), seen.end(), m.scale) != seen.end()) continue;
    seen.push_back(m.scale);
    const ScaleMetrics* p = r.find(m.scale, AlphaMode::kPointSample);
    const ScaleMetrics* e = r.find(m.scale, AlphaMode::kEaa);
    if (!p || !e) continue;
    std::snprintf(buf, sizeof buf, "%8.4g %12.5e %12.5e %9.3f %9.3f %8.4f %8.4f %12.4e %9.3f\n", m.scale, p->mse,
                  e->mse, p->psnr, e->psnr, p->ssim, e->ssim, e->mse - p->mse, e->psnr - p->psnr);
    os << buf;
  }
  if (r.pgo) {
    const PgoMetrics& g = *r.pgo;
    std::snprintf(buf, sizeof buf, "ate_pre %.6g m  ate_post %.6g m  iterations %d  fiedler %.6g  spectral_edges %d\n",
                  g.ate_pre, g.ate_post, g.iterations, g.fiedler, g.spectral_edges);
    os << buf;
  }
  return os.str();
}

}  // namespace mipslam

namespace mipslam {

QuadratureCase random_quadrature_case(std::uint64_t seed, int index) {
  std::mt19937_64 rng(mix64(seed ^ mix64(static_cast<std::uint64_t>(index) + 1)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double kappa = std::exp(unit(rng) * std::log(32.0));
  const double lam2 = std::exp(unit(rng) * std::log(16.0));
  const double lam1 = kappa * kappa * lam2;
  const double theta = unit(rng) * 3.14159265358979323846;
  Mat2 q;
  q << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  QuadratureCase c;
  c.pixel_center = Vec2(std::floor(unit(rng) * 64.0) + 0.5, std::floor(unit(rng) * 64.0) + 0.5);
  c.cov2d = q * Vec2(lam1, lam2).asDiagonal() * q.transpose();
  c.cov2d(0, 1) = c.cov2d(1, 0);
  const double r = 3.0 * std::sqrt(unit(rng));
  const double phi = 2.0 * 3.14159265358979323846 * unit(rng);
  c.mean2d = c.pixel_center + q * Vec2(std::sqrt(lam1) * r * std::cos(phi), std::sqrt(lam2) * r * std::sin(phi));
  c.opacity = 0.1 + 0.9 * unit(rng);
  return c;
}

std::vector<QuadratureBenchRow> quadrature_benchmark(int cases, std::uint64_t seed, const std::vector<int>& ks,
                                                     const QuadratureConfig& cfg, int dense_grid) {
  require(cases >= 1, "quadrature_benchmark: need at least one case");
  std::vector<QuadratureBenchRow> rows;
  for (int k : ks) rows.push_back({k, 0.0, 0.0});
  for (int i = 0; i < cases; ++i) {
    const QuadratureCase c = random_quadrature_case(seed, i);
    const double ref = dense_reference_integral(c.pixel_center, c.mean2d, c.cov2d, c.opacity, dense_grid);
    const EigenFrame frame = eigendecompose_2x2(c.cov2d);
    for (QuadratureBenchRow& row : rows) {
      QuadratureConfig qc = cfg;
      qc.k_min = qc.k_max = row.k;
      const auto samples = importance_weights(generate_samples(c.pixel_center, c.mean2d, frame, row.k, qc,
                                                               static_cast<std::uint64_t>(i)),
                                              frame, c.pixel_center, qc);
      const double a = integrated_alpha(c.opacity, samples, frame);
      const double err = std::abs(a - ref) / std::max(ref, 1e-300);
      row.mean_rel_error += err / cases;
      row.max_rel_error = std::max(row.max_rel_error, err);
    }
  }
  return rows;
}

}  // namespace mipslam
