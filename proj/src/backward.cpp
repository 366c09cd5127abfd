#include <algorithm>
#include <cmath>

#include "mipslam/rasterizer.hpp"
#include "parallel.hpp"
#include "render_internal.hpp"

namespace mipslam {

namespace {

// Gradient with respect to the 2D quantities of one prepared Gaussian.
struct ScreenGradient {
  Vec2 d_mean2d = Vec2::Zero();
  Mat2 d_cov2d = Mat2::Zero();
  double d_opacity = 0.0;  // after the 3D filter
  Vec3 d_color = Vec3::Zero();
  double d_depth = 0.0;

  void add(const ScreenGradient& o) {
    d_mean2d += o.d_mean2d;
    d_cov2d += o.d_cov2d;
    d_opacity += o.d_opacity;
    d_color += o.d_color;
    d_depth += o.d_depth;
  }
};

void alpha_backward(const detail::PreparedGaussian& g, int x, int y, int width, const RenderConfig& cfg,
                    double d_alpha, ScreenGradient& acc) {
  const AlphaGradient ag = detail::pixel_alpha_gradient(g, x, y, width, cfg);
  acc.d_opacity += d_alpha * ag.d_opacity;
  acc.d_mean2d += d_alpha * ag.d_mean2d;
  acc.d_cov2d += d_alpha * ag.d_cov2d;
}

GaussianGradient chain_to_3d(const Gaussian3D& raw, const Camera& cam,
                             const RenderConfig& cfg, const ScreenGradient& sg) {
  GaussianGradient out;
  out.d_color = sg.d_color;

  const Gaussian3D g = cfg.apply_filter ? filtered_or_unchanged(raw, cfg.filter_constant) : raw;
  const Mat3 w = cam.pose.rotation().transpose();
  const Vec3 pc = w * (g.center - cam.pose.translation());
  const double x = pc.x(), y = pc.y(), z = pc.z();
  const double iz = 1.0 / z, iz2 = iz * iz, iz3 = iz2 * iz;
  Eigen::Matrix<double, 2, 3> j;
  j << cam.fx * iz, 0.0, -cam.fx * x * iz2, 0.0, cam.fy * iz, -cam.fy * y * iz2;

  const Mat3 r = g.rotation();
  const Mat3 sigma = g.covariance();
  const Mat3 m = w * sigma * w.transpose();
  const Mat2 gs = 0.5 * (sg.d_cov2d + sg.d_cov2d.transpose());

  // cov2d = J M J^T
  const Eigen::Matrix<double, 2, 3> dj = 2.0 * gs * j * m;
  const Mat3 dm = j.transpose() * gs * j;

  Vec3 dpc = j.transpose() * sg.d_mean2d;
  dpc.z() += sg.d_depth;
  dpc.x() += dj(0, 2) * (-cam.fx * iz2);
  dpc.y() += dj(1, 2) * (-cam.fy * iz2);
  dpc.z() += dj(0, 0) * (-cam.fx * iz2) + dj(0, 2) * (2.0 * cam.fx * x * iz3) +
             dj(1, 1) * (-cam.fy * iz2) + dj(1, 2) * (2.0 * cam.fy * y * iz3);
  out.d_center = w.transpose() * dpc;

  const Mat3 g3 = w.transpose() * dm * w;
  const Mat3 n = r.transpose() * g3 * r;
  const Vec3 s2 = g.scales.array().square();
  const Mat3 a = s2.asDiagonal() * n - n * s2.asDiagonal();
  out.d_rotation = Vec3(a(1, 2) - a(2, 1), a(2, 0) - a(0, 2), a(0, 1) - a(1, 0));

  // Undo the filter: s' = sqrt(s^2 + c^2), opacity' = opacity * prod(s / s').
  const bool filtered = cfg.apply_filter && raw.sampling_frequency > 0.0;
  const double c = filtered ? cfg.filter_constant / raw.sampling_frequency : 0.0;
  double rho = 1.0;
  for (int k = 0; k < 3; ++k) {
    const double sp = g.scales[k];
    const double s = raw.scales[k];
    rho *= s / sp;
    out.d_scales[k] = 2.0 * sp * n(k, k) * (s / sp) + sg.d_opacity * g.opacity * c * c / (s * sp * sp);
  }
  out.d_opacity = sg.d_opacity * rho;
  return out;
}

}  // namespace

RenderGradient render_gradient(const Scene& scene, const Camera& cam, const Image& gt_color,
                               const Image& gt_depth, const RenderConfig& cfg, const LossWeights& lw) {
  const RenderedFrame frame = render(scene, cam, cfg);
  RenderGradient out;
  out.loss = compute_loss(frame, gt_color, gt_depth, lw);
  out.gaussians.assign(scene.gaussians.size(), GaussianGradient{});

  const double color_scale = gt_color.data.empty() ? 0.0 : 2.0 * lw.rgb / static_cast<double>(gt_color.data.size());
  std::size_t valid = 0;
  for (double d : gt_depth.data) valid += d != 0.0 ? 1 : 0;
  const double depth_scale = valid > 0 ? 2.0 * lw.depth / static_cast<double>(valid) : 0.0;

  const auto prepared = detail::prepare(scene, cam, cfg);
  const auto bins = detail::bin_tiles(prepared, cam.width, cam.height, cfg.tile_size);
  const Vec3 bg = scene.background_color;

  std::vector<std::vector<ScreenGradient>> per_tile(bins.lists.size());
  detail::parallel_for(static_cast<int>(bins.lists.size()), cfg.threads, [&](int tile) {
    const int tx = tile % bins.tiles_x;
    const int ty = tile / bins.tiles_x;
    const auto& list = bins.lists[static_cast<std::size_t>(tile)];
    auto& acc = per_tile[static_cast<std::size_t>(tile)];
    acc.assign(list.size(), ScreenGradient{});
    std::vector<detail::Contribution> contribs;
    const int xe = std::min(cam.width, (tx + 1) * bins.tile_size);
    const int ye = std::min(cam.height, (ty + 1) * bins.tile_size);
    for (int y = ty * bins.tile_size; y < ye; ++y) {
      for (int x = tx * bins.tile_size; x < xe; ++x) {
        Vec3 dl_dc;
        for (int ch = 0; ch < 3; ++ch)
          dl_dc[ch] = color_scale * (frame.color.at(x, y, ch) - gt_color.at(x, y, ch));
        const double gtd = gt_depth.at(x, y);
        const double dl_dd = gtd != 0.0 ? depth_scale * (frame.depth.at(x, y) - gtd) : 0.0;
        if (dl_dc.isZero(0.0) && dl_dd == 0.0) continue;

        detail::composite_pixel(prepared, list, x, y, cam.width, cfg, contribs);
        Vec3 after_c = bg;
        double after_d = 0.0;
        for (auto it = contribs.rbegin(); it != contribs.rend(); ++it) {
          const auto& g = prepared[static_cast<std::size_t>(list[static_cast<std::size_t>(it->slot)])];
          ScreenGradient& sg = acc[static_cast<std::size_t>(it->slot)];
          const double a = it->alpha;
          const double t = it->transmittance;
          sg.d_color += (a * t) * dl_dc;
          sg.d_depth += dl_dd * a * t;
          const double d_alpha = t * (dl_dc.dot(g.color - after_c) + dl_dd * (g.proj.depth - after_d));
          alpha_backward(g, x, y, cam.width, cfg, d_alpha, sg);
          after_c = a * g.color + (1.0 - a) * after_c;
          after_d = a * g.proj.depth + (1.0 - a) * after_d;
        }
      }
    }
  });

  std::vector<ScreenGradient> total(prepared.size());
  for (std::size_t tile = 0; tile < bins.lists.size(); ++tile) {
    const auto& list = bins.lists[tile];
    for (std::size_t slot = 0; slot < list.size(); ++slot)
      total[static_cast<std::size_t>(list[slot])].add(per_tile[tile][slot]);
  }
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    const auto& pg = prepared[i];
    out.gaussians[pg.index] = chain_to_3d(scene.gaussians[pg.index], cam, cfg, total[i]);
  }
  return out;
}

}  // namespace mipslam
