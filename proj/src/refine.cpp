#include "mipslam/refine.hpp"

#include <algorithm>
#include <cmath>

#include "parallel.hpp"
#include "render_internal.hpp"

namespace mipslam {

namespace {

double total_loss(const Scene& scene, const std::vector<Keyframe>& kfs, const RenderConfig& cfg,
                  const LossWeights& w) {
  double l = 0.0;
  for (const Keyframe& kf : kfs) l += compute_loss(render(scene, kf.camera, cfg), kf.color, kf.depth, w);
  return l;
}

bool finite(const GaussianGradient& g) {
  return g.d_center.allFinite() && g.d_rotation.allFinite() && g.d_scales.allFinite() &&
         std::isfinite(g.d_opacity) && g.d_color.allFinite();
}

Scene take_step(const Scene& scene, const std::vector<GaussianGradient>& grads, double eta,
                const RefineStepSizes& st) {
  Scene out = scene;
  for (std::size_t i = 0; i < out.gaussians.size(); ++i) {
    Gaussian3D& g = out.gaussians[i];
    const GaussianGradient& d = grads[i];
    g.center -= (eta * st.center) * d.d_center;

    const Vec3 delta = -(eta * st.rotation) * d.d_rotation;
    const double angle = delta.norm();
    if (angle > 0.0) {
      g.orientation = g.orientation * Eigen::Quaterniond(Eigen::AngleAxisd(angle, delta / angle));
      g.canonicalize();
    }
    for (int k = 0; k < 3; ++k) {
      const double step = -(eta * st.log_scale) * d.d_scales[k] * g.scales[k];
      g.scales[k] = std::max(1e-6, g.scales[k] * std::exp(std::clamp(step, -1.0, 1.0)));
    }
    g.opacity = std::clamp(g.opacity - eta * st.opacity * d.d_opacity, 0.0, 1.0);
    g.color = (g.color - (eta * st.color) * d.d_color).cwiseMax(0.0).cwiseMin(1.0);
  }
  return out;
}

}  // namespace

Scene refine_map(const Scene& scene, const std::vector<Keyframe>& keyframes, const RefineOptions& opts,
                 const RenderConfig& cfg, RefineReport* report) {
  require(opts.iters >= 1, "refine_map: iters must be >= 1");
  require(!keyframes.empty(), "refine_map: at least one keyframe is required");
  RefineReport rep;
  Scene current = scene;
  double loss = total_loss(current, keyframes, cfg, opts.loss);
  rep.losses.push_back(loss);
  double eta = 1.0;

  for (int it = 0; it < opts.iters; ++it) {
    std::vector<GaussianGradient> grads(current.gaussians.size());
    for (const Keyframe& kf : keyframes) {
      const RenderGradient rg = render_gradient(current, kf.camera, kf.color, kf.depth, cfg, opts.loss);
      for (std::size_t i = 0; i < grads.size(); ++i) {
        const GaussianGradient& g = rg.gaussians[i];
        grads[i].d_center += g.d_center;
        grads[i].d_rotation += g.d_rotation;
        grads[i].d_scales += g.d_scales;
        grads[i].d_opacity += g.d_opacity;
        grads[i].d_color += g.d_color;
      }
    }
    for (auto& g : grads) {
      if (!finite(g)) {
        g = GaussianGradient{};
        ++rep.skipped_updates;
      }
    }

    bool accepted = false;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
      Scene candidate = take_step(current, grads, eta, opts.steps);
      const double l = total_loss(candidate, keyframes, cfg, opts.loss);
      if (std::isfinite(l) && l <= loss) {
        current = std::move(candidate);
        loss = l;
        eta = std::min(eta * 2.0, 1e12);
        accepted = true;
        break;
      }
      ++rep.rejected_steps;
      eta *= 0.5;
    }
    rep.losses.push_back(loss);
    if (!accepted) break;
  }
  if (report) *report = std::move(rep);
  return current;
}

PoseNormalEquations pose_normal_equations(const Scene& scene, const Image& gt_color, const Image& gt_depth,
                                          const Camera& cam, const RenderConfig& cfg,
                                          const LossWeights& lw, double fd_step) {
  require(gt_color.width == cam.width && gt_color.height == cam.height && gt_color.channels == 3,
          "pose_normal_equations: colour resolution mismatch");
  require(gt_depth.width == cam.width && gt_depth.height == cam.height && gt_depth.channels == 1,
          "pose_normal_equations: depth resolution mismatch");
  validate(cam);
  cfg.validate();

  const auto prepared = detail::prepare(scene, cam, cfg);
  const auto bins = detail::bin_tiles(prepared, cam.width, cam.height, cfg.tile_size);

  // Projection derivatives under exp(xi) * T, by central differences.
  struct ProjDeriv {
    Eigen::Matrix<double, 2, 6> mean = Eigen::Matrix<double, 2, 6>::Zero();
    Eigen::Matrix<double, 3, 6> cov = Eigen::Matrix<double, 3, 6>::Zero();  // 00, 01, 11
    Eigen::Matrix<double, 1, 6> depth = Eigen::Matrix<double, 1, 6>::Zero();
  };
  std::vector<ProjDeriv> deriv(prepared.size());
  std::vector<Gaussian3D> filtered(prepared.size());
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    const Gaussian3D& raw = scene.gaussians[prepared[i].index];
    filtered[i] = cfg.apply_filter ? filtered_or_unchanged(raw, cfg.filter_constant) : raw;
  }
  for (int k = 0; k < 6; ++k) {
    Vec6 e = Vec6::Zero();
    e[k] = fd_step;
    Camera plus = cam, minus = cam;
    plus.pose = se3_exp(e) * cam.pose;
    minus.pose = se3_exp(-e) * cam.pose;
    for (std::size_t i = 0; i < prepared.size(); ++i) {
      const auto pp = project_gaussian(filtered[i], plus, 0.0, i);
      const auto pm = project_gaussian(filtered[i], minus, 0.0, i);
      if (!pp || !pm) continue;
      const double inv = 1.0 / (2.0 * fd_step);
      deriv[i].mean.col(k) = (pp->mean2d - pm->mean2d) * inv;
      deriv[i].cov(0, k) = (pp->cov2d(0, 0) - pm->cov2d(0, 0)) * inv;
      deriv[i].cov(1, k) = (pp->cov2d(0, 1) - pm->cov2d(0, 1)) * inv;
      deriv[i].cov(2, k) = (pp->cov2d(1, 1) - pm->cov2d(1, 1)) * inv;
      deriv[i].depth(0, k) = (pp->depth - pm->depth) * inv;
    }
  }

  const double color_w = std::sqrt(lw.rgb / (3.0 * static_cast<double>(cam.width) * cam.height));
  std::size_t valid = 0;
  for (double d : gt_depth.data) valid += d != 0.0 ? 1 : 0;
  const double depth_w = valid > 0 ? std::sqrt(lw.depth / static_cast<double>(valid)) : 0.0;
  const Vec3 bg = scene.background_color;

  std::vector<PoseNormalEquations> per_tile(bins.lists.size());
  detail::parallel_for(static_cast<int>(bins.lists.size()), cfg.threads, [&](int tile) {
    const int tx = tile % bins.tiles_x;
    const int ty = tile / bins.tiles_x;
    const auto& list = bins.lists[static_cast<std::size_t>(tile)];
    PoseNormalEquations& acc = per_tile[static_cast<std::size_t>(tile)];
    std::vector<detail::Contribution> contribs;
    const int xe = std::min(cam.width, (tx + 1) * bins.tile_size);
    const int ye = std::min(cam.height, (ty + 1) * bins.tile_size);
    for (int y = ty * bins.tile_size; y < ye; ++y) {
      for (int x = tx * bins.tile_size; x < xe; ++x) {
        const double t_end = detail::composite_pixel(prepared, list, x, y, cam.width, cfg, contribs);
        Vec3 c = Vec3::Zero();
        double d = 0.0;
        Eigen::Matrix<double, 3, 6> dc = Eigen::Matrix<double, 3, 6>::Zero();
        Eigen::Matrix<double, 1, 6> dd = Eigen::Matrix<double, 1, 6>::Zero();
        Eigen::Matrix<double, 1, 6> dt = Eigen::Matrix<double, 1, 6>::Zero();
        for (const auto& k : contribs) {
          const std::size_t pi = static_cast<std::size_t>(list[static_cast<std::size_t>(k.slot)]);
          const auto& g = prepared[pi];
          const ProjDeriv& pd = deriv[pi];
          const AlphaGradient ag = detail::pixel_alpha_gradient(g, x, y, cam.width, cfg);
          const Eigen::Matrix<double, 1, 6> da =
              ag.d_mean2d.transpose() * pd.mean + ag.d_cov2d(0, 0) * pd.cov.row(0) +
              (ag.d_cov2d(0, 1) + ag.d_cov2d(1, 0)) * pd.cov.row(1) + ag.d_cov2d(1, 1) * pd.cov.row(2);
          const double a = k.alpha;
          const double t = k.transmittance;
          const Eigen::Matrix<double, 1, 6> dw = t * da + a * dt;  // d(a T)
          c += (a * t) * g.color;
          d += a * t * g.proj.depth;
          dc += g.color * dw;
          dd += g.proj.depth * dw + (a * t) * pd.depth;
          dt = dt * (1.0 - a) - t * da;
        }
        c += t_end * bg;
        dc += bg * dt;
        for (int ch = 0; ch < 3; ++ch) {
          const double r = color_w * (c[ch] - gt_color.at(x, y, ch));
          const Eigen::Matrix<double, 1, 6> j = color_w * dc.row(ch);
          acc.loss += r * r;
          acc.jtj += j.transpose() * j;
          acc.jtr += j.transpose() * r;
        }
        const double gtd = gt_depth.at(x, y);
        if (gtd != 0.0) {
          const double r = depth_w * (d - gtd);
          const Eigen::Matrix<double, 1, 6> j = depth_w * dd;
          acc.loss += r * r;
          acc.jtj += j.transpose() * j;
          acc.jtr += j.transpose() * r;
        }
      }
    }
  });

  PoseNormalEquations out;
  for (const auto& t : per_tile) {
    out.loss += t.loss;
    out.jtj += t.jtj;
    out.jtr += t.jtr;
  }
  return out;
}

TrackResult track_pose(const Scene& scene, const Image& gt_color, const Image& gt_depth,
                       const Camera& camera_init, const TrackOptions& opts, const RenderConfig& cfg) {
  require(opts.iters >= 1, "track_pose: iters must be >= 1");
  TrackResult res;
  Camera cam = camera_init;
  res.pose = cam.pose;
  double lambda = opts.initial_damping;
  int non_improving = 0;
  bool first = true;

  for (int it = 0; it < opts.iters; ++it) {
    const PoseNormalEquations ne = pose_normal_equations(scene, gt_color, gt_depth, cam, cfg, opts.loss, opts.fd_step);
    if (first) {
      res.initial_loss = ne.loss;
      res.final_loss = ne.loss;
      first = false;
      if (ne.jtj.diagonal().maxCoeff() < 1e-16) {
        res.no_progress = ne.loss > 0.0;
        return res;
      }
    }
    if (ne.jtr.norm() < 1e-14) break;

    bool improved = false;
    while (!improved) {
      Mat6 h = ne.jtj;
      h.diagonal() += lambda * ne.jtj.diagonal().cwiseMax(1e-12);
      const Vec6 delta = h.ldlt().solve(-ne.jtr);
      if (!delta.allFinite()) throw NumericalError("track_pose: singular normal equations");
      Camera cand = cam;
      cand.pose = (se3_exp(delta) * cam.pose).normalized();
      const double l = compute_loss(render(scene, cand, cfg), gt_color, gt_depth, opts.loss);
      if (l < res.final_loss) {
        cam = cand;
        res.pose = cand.pose;
        res.final_loss = l;
        lambda = std::max(lambda * 0.1, 1e-12);
        non_improving = 0;
        improved = true;
        if (delta.norm() < 1e-10) {
          res.iterations = it + 1;
          return res;
        }
      } else {
        lambda *= 10.0;
        ++non_improving;
        if (non_improving >= opts.max_non_improving || lambda > 1e10 || delta.norm() < 1e-12) {
          res.iterations = it + 1;
          res.diverged = non_improving >= opts.max_non_improving;
          if (res.final_loss >= res.initial_loss && res.initial_loss > 0.0) res.no_progress = true;
          return res;
        }
      }
    }
    res.iterations = it + 1;
  }
  return res;
}

}  // namespace mipslam
