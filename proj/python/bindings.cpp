#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "mipslam/config.hpp"
#include "mipslam/descriptors.hpp"
#include "mipslam/io.hpp"
#include "mipslam/metrics.hpp"
#include "mipslam/pipeline.hpp"
#include "mipslam/quadrature.hpp"
#include "mipslam/rasterizer.hpp"
#include "mipslam/sapgo.hpp"
#include "mipslam/synth.hpp"
#include "mipslam/trajectory_spectral.hpp"

namespace py = pybind11;
using namespace mipslam;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> to_numpy(const Image& img) {
  std::vector<py::ssize_t> shape = {img.height, img.width};
  if (img.channels > 1) shape.push_back(img.channels);
  py::array_t<double> out(shape);
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

Image from_numpy(const Array& a) {
  require(a.ndim() == 2 || a.ndim() == 3, "expected an (H, W) or (H, W, C) array");
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), c);
  std::copy(a.data(), a.data() + a.size(), img.data.begin());
  return img;
}

SE3 pose_from(const Mat4& m) { return SE3::from_matrix(m); }

std::vector<SE3> poses_from(const std::vector<Mat4>& ms) {
  std::vector<SE3> out;
  out.reserve(ms.size());
  for (const Mat4& m : ms) out.push_back(pose_from(m));
  return out;
}

std::vector<Mat4> matrices_of(const std::vector<SE3>& ps) {
  std::vector<Mat4> out;
  for (const SE3& p : ps) out.push_back(p.matrix());
  return out;
}

RenderConfig render_config(const std::string& mode, bool apply_filter, int threads) {
  RenderConfig cfg;
  cfg.alpha_mode = alpha_mode_from_string(mode);
  cfg.apply_filter = apply_filter;
  cfg.threads = threads;
  return cfg;
}

py::dict frame_dict(const Image& color, const Image& depth, const Image* alpha) {
  py::dict d;
  d["color"] = to_numpy(color);
  d["depth"] = to_numpy(depth);
  if (alpha) d["alpha"] = to_numpy(*alpha);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Anti-aliased Gaussian splatting and spectral pose-graph optimisation";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("se3_exp", [](const Vec6& xi) { return se3_exp(xi).matrix(); }, py::arg("xi"));
  m.def("se3_log", [](const Mat4& t) { return Vec6(se3_log(pose_from(t))); }, py::arg("t"));
  m.def("look_at", [](const Vec3& eye, const Vec3& target) { return look_at(eye, target).matrix(); },
        py::arg("eye"), py::arg("target"));

  py::class_<Camera>(m, "Camera")
      .def(py::init([](double fx, double fy, double cx, double cy, int width, int height, const Mat4& pose) {
             Camera c;
             c.fx = fx;
             c.fy = fy;
             c.cx = cx;
             c.cy = cy;
             c.width = width;
             c.height = height;
             c.pose = pose_from(pose);
             validate(c);
             return c;
           }),
           py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"), py::arg("width"), py::arg("height"),
           py::arg("pose") = Mat4(Mat4::Identity()))
      .def_readwrite("fx", &Camera::fx)
      .def_readwrite("fy", &Camera::fy)
      .def_readwrite("cx", &Camera::cx)
      .def_readwrite("cy", &Camera::cy)
      .def_readwrite("width", &Camera::width)
      .def_readwrite("height", &Camera::height)
      .def_property(
          "pose", [](const Camera& c) { return c.pose.matrix(); },
          [](Camera& c, const Mat4& t) { c.pose = pose_from(t); })
      .def("scaled", &Camera::scaled, py::arg("factor"));

  py::class_<Scene>(m, "Scene")
      .def(py::init<>())
      .def("__len__", [](const Scene& s) { return s.gaussians.size(); })
      .def("to_json", [](const Scene& s) { return to_json(s).dump(); })
      .def_static("from_json", [](const std::string& text) { return scene_from_json(nlohmann::json::parse(text)); },
                  py::arg("text"))
      .def_property(
          "background", [](const Scene& s) { return s.background_color; },
          [](Scene& s, const Vec3& c) { s.background_color = c; })
      .def_property_readonly("centers", [](const Scene& s) {
        Eigen::MatrixX3d out(static_cast<Eigen::Index>(s.gaussians.size()), 3);
        for (std::size_t i = 0; i < s.gaussians.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = s.gaussians[i].center;
        return out;
      });

  m.def(
      "generate_scene",
      [](int gaussian_count, std::uint64_t seed) {
        SynthSpec spec;
        spec.gaussian_count = gaussian_count;
        return generate_synthetic_scene(spec, seed);
      },
      py::arg("gaussian_count") = 800, py::arg("seed") = 1);
  m.def(
      "default_camera",
      [](const Mat4& pose) { return make_camera(SynthSpec{}, pose_from(pose)); }, py::arg("pose"));
  m.def(
      "generate_trajectory",
      [](int pose_count, double sigma_t, double sigma_r, std::uint64_t seed) {
        SynthSpec spec;
        spec.pose_count = pose_count;
        spec.sigma_t = sigma_t;
        spec.sigma_r = sigma_r;
        const SyntheticTrajectory t = generate_trajectory(spec, seed);
        std::vector<PoseEdge> edges = t.odometry;
        edges.insert(edges.end(), t.loops.begin(), t.loops.end());
        const PoseGraph g = make_pose_graph(dead_reckon(t.truth.front(), t.odometry), t.timestamps, edges);
        py::dict d;
        d["truth"] = matrices_of(t.truth);
        d["timestamps"] = t.timestamps;
        d["graph_g2o"] = g2o_string(g);
        return d;
      },
      py::arg("pose_count") = 100, py::arg("sigma_t") = 0.01, py::arg("sigma_r") = 0.5 * M_PI / 180.0,
      py::arg("seed") = 1);

  m.def(
      "render",
      [](const Scene& scene, const Camera& cam, const std::string& mode, bool apply_filter, int threads) {
        const RenderConfig cfg = render_config(mode, apply_filter, threads);
        RenderedFrame f;
        {
          py::gil_scoped_release release;
          f = render(scene, cam, cfg);
        }
        return frame_dict(f.color, f.depth, &f.alpha);
      },
      py::arg("scene"), py::arg("camera"), py::arg("mode") = "eaa", py::arg("apply_filter") = true,
      py::arg("threads") = 0);
  m.def(
      "render_ground_truth",
      [](const Scene& scene, const Camera& cam, int supersample, int threads) {
        GroundTruth g;
        {
          py::gil_scoped_release release;
          g = render_ground_truth(scene, cam, supersample, threads);
        }
        return frame_dict(g.color, g.depth, nullptr);
      },
      py::arg("scene"), py::arg("camera"), py::arg("supersample") = 4, py::arg("threads") = 0);

  m.def(
      "integrated_alpha",
      [](const Vec2& pixel_center, const Vec2& mean2d, const Mat2& cov2d, double opacity, int k) {
        QuadratureConfig cfg;
        const EigenFrame f = eigendecompose_2x2(cov2d);
        if (k <= 0) k = sample_count(f.condition_number, cfg);
        const auto s = importance_weights(generate_samples(pixel_center, mean2d, f, k, cfg), f, pixel_center, cfg);
        return integrated_alpha(opacity, s, f);
      },
      py::arg("pixel_center"), py::arg("mean2d"), py::arg("cov2d"), py::arg("opacity") = 1.0, py::arg("k") = 0);
  m.def("dense_reference_integral", &dense_reference_integral, py::arg("pixel_center"), py::arg("mean2d"),
        py::arg("cov2d"), py::arg("opacity") = 1.0, py::arg("grid_n") = 256);

  m.def(
      "psnr",
      [](const Array& a, const Array& b) {
        const Psnr p = compute_psnr(from_numpy(a), from_numpy(b));
        return p.db;
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "ssim", [](const Array& a, const Array& b) { return compute_ssim(from_numpy(a), from_numpy(b)); }, py::arg("a"),
      py::arg("b"));
  m.def(
      "ate",
      [](const std::vector<Mat4>& est, const std::vector<Mat4>& truth) {
        return compute_ate(poses_from(est), poses_from(truth));
      },
      py::arg("estimate"), py::arg("truth"));

  m.def(
      "extract_descriptor",
      [](const Array& rgb) { return extract_descriptor(from_numpy(rgb)).concatenated(); }, py::arg("rgb"));
  m.def(
      "descriptor_similarity",
      [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return descriptor_similarity(Descriptor::from_concatenated(a), Descriptor::from_concatenated(b));
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "trajectory_signatures",
      [](const std::vector<Mat4>& poses, const std::vector<double>& timestamps, int window, int hop) {
        SpectralConfig cfg;
        cfg.window = window;
        cfg.hop = hop;
        const TrajectorySignatures s = trajectory_signatures(pose_samples(poses_from(poses), timestamps, cfg), cfg);
        Eigen::MatrixXd c(static_cast<Eigen::Index>(s.windows.size()), 6);
        std::vector<int> starts;
        for (std::size_t i = 0; i < s.windows.size(); ++i) {
          c.row(static_cast<Eigen::Index>(i)) = s.windows[i].signature.centroids.transpose();
          starts.push_back(s.windows[i].start);
        }
        return py::make_tuple(starts, c);
      },
      py::arg("poses"), py::arg("timestamps"), py::arg("window") = 32, py::arg("hop") = 16);

  m.def(
      "laplacian_spectrum",
      [](const Eigen::MatrixXd& adjacency) {
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(adjacency.rows(), adjacency.cols());
        d.diagonal() = adjacency.rowwise().sum();
        const LaplacianSpectrum s = laplacian_spectrum(normalized_laplacian(adjacency, d));
        return py::make_tuple(s.eigenvalues, s.eigenvectors, s.fiedler);
      },
      py::arg("adjacency"));
  m.def(
      "optimize_g2o",
      [](const std::string& text, double lambda_spe, double lambda_smo, int max_iterations) {
        SolverConfig cfg;
        cfg.max_iterations = max_iterations;
        const PoseGraph g = parse_g2o(text);
        OptimizeReport rep;
        PoseGraph out;
        {
          py::gil_scoped_release release;
          out = optimize(g, lambda_spe, lambda_smo, cfg, &rep);
        }
        py::dict d;
        d["graph_g2o"] = g2o_string(out);
        d["poses"] = matrices_of([&] {
          std::vector<SE3> p;
          for (const auto& n : out.nodes) p.push_back(n.pose);
          return p;
        }());
        d["objective"] = rep.objective;
        d["converged"] = rep.converged;
        return d;
      },
      py::arg("g2o"), py::arg("lambda_spe") = 0.1, py::arg("lambda_smo") = 0.1, py::arg("max_iterations") = 100);

  m.def(
      "default_config_json", [] { return to_json(default_pipeline_config()).dump(); });
  m.def(
      "run_pipeline",
      [](const std::string& config_json, const std::string& out_dir) {
        const PipelineConfig cfg =
            config_json.empty() ? default_pipeline_config() : config_from_json(nlohmann::json::parse(config_json));
        PipelineResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(cfg, out_dir);
        }
        return report_json(r).dump();
      },
      py::arg("config_json"), py::arg("out_dir"));
}
