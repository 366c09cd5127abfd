#include "mipslam/rasterizer.hpp"

#include <algorithm>
#include <cmath>

#include "parallel.hpp"
#include "render_internal.hpp"

namespace mipslam {

const char* to_string(AlphaMode m) { return m == AlphaMode::kEaa ? "eaa" : "point"; }

AlphaMode alpha_mode_from_string(const std::string& s) {
  if (s == "eaa") return AlphaMode::kEaa;
  if (s == "point" || s == "point_sample") return AlphaMode::kPointSample;
  throw InvalidArgument("unknown alpha mode '" + s + "' (expected point or eaa)");
}

void RenderConfig::validate() const {
  require(tile_size >= 1, "RenderConfig: tile_size must be >= 1");
  require(transmittance_cutoff > 0.0 && transmittance_cutoff < 1.0,
          "RenderConfig: transmittance_cutoff must lie in (0, 1)");
  require(near_plane > 0.0, "RenderConfig: near_plane must be positive");
  require(filter_constant >= 0.0, "RenderConfig: filter_constant must be >= 0");
  require(threads >= 0, "RenderConfig: threads must be >= 0");
  quadrature.validate();
}

namespace detail {

std::vector<PreparedGaussian> prepare(const Scene& scene, const Camera& cam, const RenderConfig& cfg) {
  std::vector<PreparedGaussian> out;
  out.reserve(scene.gaussians.size());
  for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
    const Gaussian3D& raw = scene.gaussians[i];
    const Gaussian3D g = cfg.apply_filter ? filtered_or_unchanged(raw, cfg.filter_constant) : raw;
    auto proj = project_gaussian(g, cam, cfg.near_plane, i);
    if (!proj) continue;
    PreparedGaussian p;
    p.index = i;
    p.proj = *proj;
    p.frame = eigendecompose_2x2(p.proj.cov2d);
    p.inv_cov = p.frame.eigvecs * p.frame.eigvals.cwiseInverse().asDiagonal() * p.frame.eigvecs.transpose();
    p.k = sample_count(p.frame.condition_number, cfg.quadrature);
    p.color = g.color;
    const double rx = 3.0 * std::sqrt(p.proj.cov2d(0, 0));
    const double ry = 3.0 * std::sqrt(p.proj.cov2d(1, 1));
    const double fx0 = std::floor(p.proj.mean2d.x() - rx);
    const double fx1 = std::floor(p.proj.mean2d.x() + rx);
    const double fy0 = std::floor(p.proj.mean2d.y() - ry);
    const double fy1 = std::floor(p.proj.mean2d.y() + ry);
    p.x0 = static_cast<int>(std::clamp(fx0, 0.0, static_cast<double>(cam.width - 1)));
    p.x1 = static_cast<int>(std::clamp(fx1, -1.0, static_cast<double>(cam.width - 1)));
    p.y0 = static_cast<int>(std::clamp(fy0, 0.0, static_cast<double>(cam.height - 1)));
    p.y1 = static_cast<int>(std::clamp(fy1, -1.0, static_cast<double>(cam.height - 1)));
    if (fx1 < 0.0 || fy1 < 0.0 || fx0 > cam.width - 1 || fy0 > cam.height - 1) continue;
    if (p.x1 < p.x0 || p.y1 < p.y0) continue;
    out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const PreparedGaussian& a, const PreparedGaussian& b) {
    if (a.proj.depth != b.proj.depth) return a.proj.depth < b.proj.depth;
    return a.index < b.index;
  });
  return out;
}

double pixel_alpha(const PreparedGaussian& g, int x, int y, int width, const RenderConfig& cfg) {
  const Vec2 center(x + 0.5, y + 0.5);
  if (cfg.alpha_mode == AlphaMode::kPointSample) {
    const Vec2 d = center - g.proj.mean2d;
    return g.proj.opacity * std::exp(-0.5 * d.dot(g.inv_cov * d));
  }
  const std::uint64_t pixel_index =
      static_cast<std::uint64_t>(y) * static_cast<std::uint64_t>(width) + static_cast<std::uint64_t>(x);
  auto samples = generate_samples(center, g.proj.mean2d, g.frame, g.k, cfg.quadrature, pixel_index, g.index);
  samples = importance_weights(std::move(samples), g.frame, center, cfg.quadrature);
  return integrated_alpha(g.proj.opacity, samples, g.frame);
}

AlphaGradient pixel_alpha_gradient(const PreparedGaussian& g, int x, int y, int width,
                                   const RenderConfig& cfg) {
  const Vec2 center(x + 0.5, y + 0.5);
  if (cfg.alpha_mode == AlphaMode::kPointSample) {
    const Vec2 d = center - g.proj.mean2d;
    const Vec2 u = g.inv_cov * d;
    const double e = std::exp(-0.5 * d.dot(u));
    const double a = g.proj.opacity * e;
    AlphaGradient out;
    out.d_opacity = e;
    out.d_mean2d = a * u;
    out.d_cov2d = (0.5 * a) * (u * u.transpose());
    return out;
  }
  const std::uint64_t pixel_index =
      static_cast<std::uint64_t>(y) * static_cast<std::uint64_t>(width) + static_cast<std::uint64_t>(x);
  auto samples = generate_samples(center, g.proj.mean2d, g.frame, g.k, cfg.quadrature, pixel_index, g.index);
  samples = importance_weights(std::move(samples), g.frame, center, cfg.quadrature);
  return integrated_alpha_gradient(g.proj.opacity, samples, g.frame, g.proj.mean2d);
}

TileBins bin_tiles(const std::vector<PreparedGaussian>& prepared, int width, int height, int tile_size) {
  TileBins b;
  b.tile_size = tile_size;
  b.tiles_x = (width + tile_size - 1) / tile_size;
  b.tiles_y = (height + tile_size - 1) / tile_size;
  b.lists.resize(static_cast<std::size_t>(b.tiles_x) * static_cast<std::size_t>(b.tiles_y));
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    const PreparedGaussian& p = prepared[i];
    for (int ty = p.y0 / tile_size; ty <= p.y1 / tile_size; ++ty)
      for (int tx = p.x0 / tile_size; tx <= p.x1 / tile_size; ++tx)
        b.lists[static_cast<std::size_t>(ty * b.tiles_x + tx)].push_back(static_cast<int>(i));
  }
  return b;
}

double composite_pixel(const std::vector<PreparedGaussian>& prepared, const std::vector<int>& list,
                       int x, int y, int width, const RenderConfig& cfg,
                       std::vector<Contribution>& out) {
  out.clear();
  double t = 1.0;
  for (std::size_t slot = 0; slot < list.size(); ++slot) {
    const PreparedGaussian& g = prepared[static_cast<std::size_t>(list[slot])];
    if (!g.covers(x, y)) continue;
    const double a = pixel_alpha(g, x, y, width, cfg);
    out.push_back({static_cast<int>(slot), a, t});
    t *= 1.0 - a;
    if (t < cfg.transmittance_cutoff) break;
  }
  return t;
}

}  // namespace detail

RenderedFrame render(const Scene& scene, const Camera& cam, const RenderConfig& cfg) {
  validate(cam);
  cfg.validate();
  RenderedFrame f;
  f.alpha_mode = cfg.alpha_mode;
  f.color = Image(cam.width, cam.height, 3);
  f.depth = Image(cam.width, cam.height, 1);
  f.alpha = Image(cam.width, cam.height, 1);

  const auto prepared = detail::prepare(scene, cam, cfg);
  const auto bins = detail::bin_tiles(prepared, cam.width, cam.height, cfg.tile_size);
  const Vec3 bg = scene.background_color;

  detail::parallel_for(static_cast<int>(bins.lists.size()), cfg.threads, [&](int tile) {
    const int tx = tile % bins.tiles_x;
    const int ty = tile / bins.tiles_x;
    const auto& list = bins.lists[static_cast<std::size_t>(tile)];
    std::vector<detail::Contribution> contribs;
    const int xe = std::min(cam.width, (tx + 1) * bins.tile_size);
    const int ye = std::min(cam.height, (ty + 1) * bins.tile_size);
    for (int y = ty * bins.tile_size; y < ye; ++y) {
      for (int x = tx * bins.tile_size; x < xe; ++x) {
        const double t = detail::composite_pixel(prepared, list, x, y, cam.width, cfg, contribs);
        Vec3 c = Vec3::Zero();
        double d = 0.0;
        for (const auto& k : contribs) {
          const auto& g = prepared[static_cast<std::size_t>(list[static_cast<std::size_t>(k.slot)])];
          const double w = k.alpha * k.transmittance;
          c += w * g.color;
          d += w * g.proj.depth;
        }
        c += t * bg;
        for (int ch = 0; ch < 3; ++ch) f.color.at(x, y, ch) = c[ch];
        f.depth.at(x, y) = d;
        f.alpha.at(x, y) = 1.0 - t;
      }
    }
  });
  return f;
}

double compute_loss(const RenderedFrame& rendered, const Image& gt_color, const Image& gt_depth,
                    const LossWeights& w) {
  require(rendered.color.same_shape(gt_color), "compute_loss: colour resolution mismatch");
  require(rendered.depth.same_shape(gt_depth), "compute_loss: depth resolution mismatch");
  double sse = 0.0;
  for (std::size_t i = 0; i < gt_color.data.size(); ++i) {
    const double e = rendered.color.data[i] - gt_color.data[i];
    sse += e * e;
  }
  double loss = 0.0;
  if (!gt_color.data.empty()) loss += w.rgb * sse / static_cast<double>(gt_color.data.size());
  double dse = 0.0;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < gt_depth.data.size(); ++i) {
    if (gt_depth.data[i] == 0.0) continue;
    const double e = rendered.depth.data[i] - gt_depth.data[i];
    dse += e * e;
    ++valid;
  }
  if (valid > 0) loss += w.depth * dse / static_cast<double>(valid);
  return loss;
}

}  // namespace mipslam
