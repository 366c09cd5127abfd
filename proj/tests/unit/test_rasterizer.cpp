#include <doctest.h>

#include <random>

#include "mipslam/rasterizer.hpp"
#include "mipslam/synth.hpp"
#include "test_helpers.hpp"

using namespace mipslam;

namespace {

Camera small_camera(int w = 48, int h = 40, double f = 60.0) {
  Camera cam;
  cam.fx = cam.fy = f;
  cam.cx = w / 2.0;
  cam.cy = h / 2.0;
  cam.width = w;
  cam.height = h;
  return cam;
}

Scene textured_scene(std::uint64_t seed, int count = 150) {
  SynthSpec spec;
  spec.gaussian_count = count;
  spec.extent = 1.0;
  spec.scale_min = 0.02;
  spec.scale_max = 0.08;
  return generate_synthetic_scene(spec, seed);
}

Camera scene_camera(int w = 48, int h = 40) {
  Camera cam = small_camera(w, h, 50.0);
  cam.pose = look_at(Vec3(0.3, -2.2, 0.4), Vec3::Zero());
  return cam;
}

}  // namespace

TEST_CASE("empty scene renders the background") {
  Scene s;
  s.background_color = Vec3(0.1, 0.2, 0.3);
  const RenderedFrame f = render(s, small_camera(), RenderConfig{});
  for (int y = 0; y < f.color.height; ++y)
    for (int x = 0; x < f.color.width; ++x) {
      for (int c = 0; c < 3; ++c) CHECK(f.color.at(x, y, c) == s.background_color[c]);
      CHECK(f.depth.at(x, y) == 0.0);
      CHECK(f.alpha.at(x, y) == 0.0);
    }
}

TEST_CASE("single near-opaque flat Gaussian") {
  Scene s;
  s.background_color = Vec3(0.2, 0.2, 0.2);
  Gaussian3D g;
  g.center = Vec3(0, 0, 3.0);
  g.scales = Vec3::Constant(10.0);
  g.opacity = 0.99;
  g.color = Vec3(0.9, 0.1, 0.4);
  s.gaussians = {g};
  for (AlphaMode mode : {AlphaMode::kPointSample, AlphaMode::kEaa}) {
    RenderConfig cfg;
    cfg.alpha_mode = mode;
    const RenderedFrame f = render(s, small_camera(), cfg);
    const int x = 24, y = 20;
    const auto prep = detail::prepare(s, small_camera(), cfg);
    REQUIRE(prep.size() == 1);
    const double a = detail::pixel_alpha(prep[0], x, y, f.color.width, cfg);
    CHECK(a == doctest::Approx(0.99).epsilon(1e-4));
    for (int c = 0; c < 3; ++c)
      CHECK(std::abs(f.color.at(x, y, c) - (g.color[c] * a + s.background_color[c] * (1 - a))) < 1e-12);
    CHECK(std::abs(f.depth.at(x, y) - 3.0 * a) < 1e-12);
  }
}

TEST_CASE("two-Gaussian compositing matches the hand expansion") {
  Scene s;
  s.background_color = Vec3(0.05, 0.1, 0.15);
  Gaussian3D g1, g2;
  g1.center = Vec3(0.01, -0.02, 2.0);
  g1.scales = Vec3(0.05, 0.08, 0.05);
  g1.opacity = 0.6;
  g1.color = Vec3(0.9, 0.2, 0.1);
  g2.center = Vec3(-0.03, 0.01, 3.0);
  g2.scales = Vec3(0.1, 0.06, 0.05);
  g2.opacity = 0.8;
  g2.color = Vec3(0.1, 0.7, 0.3);
  s.gaussians = {g2, g1};  // stored back to front; sorting must fix it
  const Camera cam = small_camera();
  for (AlphaMode mode : {AlphaMode::kPointSample, AlphaMode::kEaa}) {
    RenderConfig cfg;
    cfg.alpha_mode = mode;
    const RenderedFrame f = render(s, cam, cfg);
    const auto prep = detail::prepare(s, cam, cfg);
    REQUIRE(prep.size() == 2);
    CHECK(prep[0].index == 1);
    for (int y = 17; y < 23; ++y)
      for (int x = 21; x < 27; ++x) {
        double a1 = prep[0].covers(x, y) ? detail::pixel_alpha(prep[0], x, y, cam.width, cfg) : 0.0;
        double a2 = prep[1].covers(x, y) ? detail::pixel_alpha(prep[1], x, y, cam.width, cfg) : 0.0;
        if (mode == AlphaMode::kPointSample) {
          // independent point evaluation from the projected moments
          const Vec2 u(x + 0.5, y + 0.5);
          const Vec2 d1 = u - prep[0].proj.mean2d, d2 = u - prep[1].proj.mean2d;
          CHECK(std::abs(a1 - prep[0].proj.opacity * std::exp(-0.5 * d1.dot(prep[0].proj.cov2d.inverse() * d1))) < 1e-12);
          CHECK(std::abs(a2 - prep[1].proj.opacity * std::exp(-0.5 * d2.dot(prep[1].proj.cov2d.inverse() * d2))) < 1e-12);
        }
        for (int c = 0; c < 3; ++c) {
          const double expect = g1.color[c] * a1 + g2.color[c] * a2 * (1 - a1) +
                                s.background_color[c] * (1 - a1) * (1 - a2);
          CHECK(std::abs(f.color.at(x, y, c) - expect) < 1e-9);
        }
        CHECK(std::abs(f.depth.at(x, y) - (2.0 * a1 + 3.0 * a2 * (1 - a1))) < 1e-9);
        CHECK(std::abs(f.alpha.at(x, y) - (1 - (1 - a1) * (1 - a2))) < 1e-9);
      }
  }
}

TEST_CASE("render is independent of tile size and thread count") {
  const Scene s = textured_scene(3);
  const Camera cam = scene_camera(70, 50);
  for (AlphaMode mode : {AlphaMode::kPointSample, AlphaMode::kEaa}) {
    RenderConfig base;
    base.alpha_mode = mode;
    base.quadrature.jitter = 1.0;
    base.quadrature.deterministic_seed = 5;
    const RenderedFrame ref = render(s, cam, base);
    for (int ts : {8, 32}) {
      for (int th : {1, 3}) {
        RenderConfig cfg = base;
        cfg.tile_size = ts;
        cfg.threads = th;
        const RenderedFrame f = render(s, cam, cfg);
        CHECK(f.color.data == ref.color.data);
        CHECK(f.depth.data == ref.depth.data);
      }
    }
  }
}

TEST_CASE("rendered values stay in range") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Scene s = textured_scene(seed, 300);
    for (AlphaMode mode : {AlphaMode::kPointSample, AlphaMode::kEaa}) {
      RenderConfig cfg;
      cfg.alpha_mode = mode;
      const RenderedFrame f = render(s, scene_camera(), cfg);
      for (double v : f.color.data) CHECK((v >= 0.0 && v <= 1.0));
      for (double v : f.depth.data) CHECK(v >= 0.0);
      for (double v : f.alpha.data) CHECK((v >= 0.0 && v <= 1.0));
    }
  }
}

TEST_CASE("EAA and point sampling agree on smooth footprints") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.3, 0.3), c(0.0, 1.0);
  Scene s;
  for (int i = 0; i < 6; ++i) {
    Gaussian3D g;
    g.center = Vec3(u(rng), u(rng), 2.0 + i * 0.2);
    g.orientation = testing::random_quat(rng);
    g.scales = Vec3(0.8, 0.7, 0.9);  // min eigenvalue above 100 px^2
    g.opacity = 0.3 + 0.5 * c(rng);
    g.color = Vec3(c(rng), c(rng), c(rng));
    s.gaussians.push_back(g);
  }
  const Camera cam = small_camera(48, 40, 60.0);
  RenderConfig cfg;
  for (const auto& p : detail::prepare(s, cam, cfg)) CHECK(p.frame.eigvals(1) >= 100.0);
  cfg.alpha_mode = AlphaMode::kPointSample;
  const RenderedFrame a = render(s, cam, cfg);
  cfg.alpha_mode = AlphaMode::kEaa;
  const RenderedFrame b = render(s, cam, cfg);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.color.data.size(); ++i) worst = std::max(worst, std::abs(a.color.data[i] - b.color.data[i]));
  CHECK(worst < 1e-3);
}

TEST_CASE("compute_loss examples") {
  const Scene s = textured_scene(5);
  const Camera cam = scene_camera();
  const RenderedFrame f = render(s, cam, RenderConfig{});
  CHECK(compute_loss(f, f.color, f.depth) == 0.0);

  Image shifted = f.color;
  for (double& v : shifted.data) v += 0.05;
  CHECK(compute_loss(f, shifted, f.depth, {1.0, 0.1}) == doctest::Approx(0.0025).epsilon(1e-12));
  CHECK(compute_loss(f, shifted, f.depth, {2.0, 0.1}) == doctest::Approx(0.005).epsilon(1e-12));

  Image depth2 = f.depth;
  for (double& v : depth2.data) v *= 1.5;
  CHECK(compute_loss(f, f.color, depth2, {1.0, 0.0}) == 0.0);
  CHECK(compute_loss(f, f.color, depth2, {1.0, 0.1}) > 0.0);

  // depth entries of zero are masked
  Image masked(f.depth.width, f.depth.height, 1, 0.0);
  CHECK(compute_loss(f, f.color, masked, {1.0, 1.0}) == 0.0);

  Image wrong(3, 3, 3);
  CHECK_THROWS_AS(compute_loss(f, wrong, f.depth), InvalidArgument);
}

TEST_CASE("render_gradient matches finite differences of the loss") {
  const Scene truth = textured_scene(6, 40);
  const Camera cam = scene_camera(40, 32);
  for (AlphaMode mode : {AlphaMode::kPointSample, AlphaMode::kEaa}) {
    RenderConfig cfg;
    cfg.alpha_mode = mode;
    Scene s = truth;
    for (Gaussian3D& g : s.gaussians) g.sampling_frequency = 20.0;
    const RenderedFrame gt = render(truth, cam, cfg);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    for (Gaussian3D& g : s.gaussians) {
      g.center += 0.02 * Vec3(n(rng), n(rng), n(rng));
      g.color = (g.color + 0.1 * Vec3(n(rng), n(rng), n(rng))).cwiseMax(0.0).cwiseMin(1.0);
      g.opacity = std::clamp(g.opacity - 0.1, 0.05, 0.95);
    }
    const RenderGradient rg = render_gradient(s, cam, gt.color, gt.depth, cfg);
    auto loss = [&](const Scene& x) { return compute_loss(render(x, cam, cfg), gt.color, gt.depth); };
    CHECK(rg.loss == doctest::Approx(loss(s)).epsilon(1e-12));

    const double h = 1e-6;
    int checked = 0, agree = 0;
    for (std::size_t i = 0; i < s.gaussians.size(); ++i) {
      const GaussianGradient& gi = rg.gaussians[i];
      auto fd = [&](auto perturb) {
        Scene p = s, m = s;
        perturb(p.gaussians[i], h);
        perturb(m.gaussians[i], -h);
        return (loss(p) - loss(m)) / (2 * h);
      };
      std::vector<std::pair<double, double>> pairs;
      for (int k = 0; k < 3; ++k) {
        pairs.push_back({gi.d_center[k], fd([k](Gaussian3D& g, double e) { g.center[k] += e; })});
        pairs.push_back({gi.d_color[k], fd([k](Gaussian3D& g, double e) { g.color[k] += e; })});
        pairs.push_back({gi.d_scales[k], fd([k](Gaussian3D& g, double e) { g.scales[k] += e; })});
        pairs.push_back({gi.d_rotation[k], fd([k](Gaussian3D& g, double e) {
                           g.orientation = g.orientation * Eigen::Quaterniond(Eigen::AngleAxisd(e, Vec3::Unit(k)));
                         })});
      }
      pairs.push_back({gi.d_opacity, fd([](Gaussian3D& g, double e) { g.opacity += e; })});
      for (auto [a, b] : pairs) {
        if (std::max(std::abs(a), std::abs(b)) < 1e-7) continue;
        ++checked;
        agree += std::abs(a - b) <= 1e-3 * std::max(std::abs(a), std::abs(b)) + 1e-8 ? 1 : 0;
      }
    }
    // Bounding-box truncation makes a few finite differences jump; the vast
    // majority must agree tightly.
    CHECK(checked > 100);
    CHECK(agree >= checked * 97 / 100);
  }
}
