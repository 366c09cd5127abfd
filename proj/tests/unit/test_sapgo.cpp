#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include <Eigen/Eigenvalues>

#include "mipslam/metrics.hpp"
#include "mipslam/sapgo.hpp"
#include "mipslam/synth.hpp"
#include "test_helpers.hpp"

using namespace mipslam;

namespace {

PoseGraph graph_from_weights(const Eigen::MatrixXd& w) {
  PoseGraph g;
  for (int i = 0; i < w.rows(); ++i) g.nodes.push_back({i, SE3(), {}, {}, static_cast<double>(i)});
  for (int i = 0; i < w.rows(); ++i)
    for (int j = i + 1; j < w.cols(); ++j)
      if (w(i, j) > 0.0) {
        PoseEdge e;
        e.from = i;
        e.to = j;
        e.confidence = w(i, j);
        e.kind = EdgeKind::kLoop;
        g.edges.push_back(e);
      }
  return g;
}

LaplacianSpectrum spectrum_of(const Eigen::MatrixXd& w) {
  const Adjacency adj = build_adjacency(graph_from_weights(w));
  return laplacian_spectrum(normalized_laplacian(adj.a, adj.d));
}

int component_count(const Eigen::MatrixXd& w) {
  const int n = static_cast<int>(w.rows());
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  int c = 0;
  for (int s = 0; s < n; ++s) {
    if (label[static_cast<std::size_t>(s)] >= 0) continue;
    std::vector<int> stack{s};
    label[static_cast<std::size_t>(s)] = c;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int u = 0; u < n; ++u)
        if (w(v, u) > 0.0 && label[static_cast<std::size_t>(u)] < 0) {
          label[static_cast<std::size_t>(u)] = c;
          stack.push_back(u);
        }
    }
    ++c;
  }
  return c;
}

struct CircleProblem {
  SyntheticTrajectory traj;
  PoseGraph graph;
};

CircleProblem circle_problem(std::uint64_t seed, int poses, double sigma_t, double sigma_r) {
  SynthSpec spec;
  spec.pose_count = poses;
  spec.sigma_t = sigma_t;
  spec.sigma_r = sigma_r;
  CircleProblem p;
  p.traj = generate_trajectory(spec, seed);
  std::vector<PoseEdge> edges = p.traj.odometry;
  edges.insert(edges.end(), p.traj.loops.begin(), p.traj.loops.end());
  p.graph = make_pose_graph(dead_reckon(p.traj.truth.front(), p.traj.odometry), p.traj.timestamps, edges);
  return p;
}

std::vector<SE3> poses_of(const PoseGraph& g) {
  std::vector<SE3> out;
  for (const auto& n : g.nodes) out.push_back(n.pose);
  return out;
}

}  // namespace

TEST_CASE("adjacency keeps the strongest edge per pair") {
  PoseGraph g = graph_from_weights(Eigen::MatrixXd::Zero(3, 3));
  g.edges.push_back({0, 1, SE3(), Mat6::Identity(), 0.3, EdgeKind::kSpectral});
  g.edges.push_back({1, 0, SE3(), Mat6::Identity(), 0.8, EdgeKind::kOdometry});
  g.edges.push_back({1, 2, SE3(), Mat6::Identity(), 0.5, EdgeKind::kLoop});
  g.edges.push_back({2, 2, SE3(), Mat6::Identity(), 0.9, EdgeKind::kLoop});
  const Adjacency adj = build_adjacency(g);
  CHECK(adj.a(0, 1) == 0.8);
  CHECK(adj.a(1, 0) == 0.8);
  CHECK(adj.a(1, 2) == 0.5);
  CHECK(adj.a(2, 2) == 0.0);
  CHECK(adj.d(1, 1) == doctest::Approx(1.3));
  CHECK(adj.d(0, 1) == 0.0);
}

TEST_CASE("path graph P3") {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 3);
  w(0, 1) = w(1, 0) = w(1, 2) = w(2, 1) = 1.0;
  const Adjacency adj = build_adjacency(graph_from_weights(w));
  const Eigen::MatrixXd l = normalized_laplacian(adj.a, adj.d);
  const double r = 1.0 / std::sqrt(2.0);
  Eigen::Matrix3d expected;
  expected << 1, -r, 0, -r, 1, -r, 0, -r, 1;
  CHECK((l - expected).cwiseAbs().maxCoeff() < 1e-15);
  const LaplacianSpectrum s = laplacian_spectrum(l);
  CHECK(std::abs(s.eigenvalues[0] - 0.0) < 1e-9);
  CHECK(std::abs(s.eigenvalues[1] - 1.0) < 1e-9);
  CHECK(std::abs(s.eigenvalues[2] - 2.0) < 1e-9);
  CHECK(s.fiedler == s.eigenvalues[1]);
}

TEST_CASE("complete graph K4") {
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(4, 4);
  w.diagonal().setZero();
  const LaplacianSpectrum s = spectrum_of(w);
  CHECK(std::abs(s.eigenvalues[0]) < 1e-9);
  for (int i = 1; i < 4; ++i) CHECK(std::abs(s.eigenvalues[i] - 4.0 / 3.0) < 1e-9);
}

TEST_CASE("disconnected graph has a zero Fiedler value") {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(4, 4);
  w(0, 1) = w(1, 0) = 1.0;
  w(2, 3) = w(3, 2) = 0.4;
  const LaplacianSpectrum s = spectrum_of(w);
  CHECK(s.fiedler < 1e-10);
  CHECK(std::abs(s.eigenvalues[2] - 2.0) < 1e-9);
  CHECK(std::abs(s.eigenvalues[3] - 2.0) < 1e-9);
}

TEST_CASE("Jacobi spectrum matches a reference eigensolver on random graphs") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> size(2, 24);
  for (int t = 0; t < 100; ++t) {
    const int n = size(rng);
    const double density = 0.05 + 0.6 * u(rng);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (u(rng) < density) w(i, j) = w(j, i) = 0.05 + u(rng);
    const Adjacency adj = build_adjacency(graph_from_weights(w));
    const Eigen::MatrixXd l = normalized_laplacian(adj.a, adj.d);
    const LaplacianSpectrum s = laplacian_spectrum(l);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(l);
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(s.eigenvalues[i] - ref.eigenvalues()[i]) < 1e-9);
      CHECK(s.eigenvalues[i] >= -1e-9);
      CHECK(s.eigenvalues[i] <= 2.0 + 1e-9);
      if (i > 0) CHECK(s.eigenvalues[i] >= s.eigenvalues[i - 1]);
      CHECK((l * s.eigenvectors.col(i) - s.eigenvalues[i] * s.eigenvectors.col(i)).norm() < 1e-8);
    }
    CHECK((s.eigenvectors.transpose() * s.eigenvectors - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-9);
    int zeros = 0;
    for (int i = 0; i < n; ++i) zeros += s.eigenvalues[i] < 1e-9;
    CHECK(zeros == component_count(w));
  }
}

TEST_CASE("spectrum is invariant to node relabelling") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 12;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (u(rng) < 0.4) w(i, j) = w(j, i) = u(rng);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd wp(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) wp(perm[i], perm[j]) = w(i, j);
  CHECK((spectrum_of(w).eigenvalues - spectrum_of(wp).eigenvalues).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("laplacian_spectrum rejects asymmetric input") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(3, 3);
  m(0, 1) = 0.5;
  CHECK_THROWS_AS(laplacian_spectrum(m), InvalidArgument);
}

TEST_CASE("two cliques with a weak bridge separate into two clusters") {
  const int n = 10;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && (i < 5) == (j < 5)) w(i, j) = 1.0;
  w(4, 5) = w(5, 4) = 0.01;
  const LaplacianSpectrum s = spectrum_of(w);
  const std::vector<int> labels = cluster_nodes(s, 2);
  for (int i = 1; i < 5; ++i) CHECK(labels[static_cast<std::size_t>(i)] == labels[0]);
  for (int i = 6; i < 10; ++i) CHECK(labels[static_cast<std::size_t>(i)] == labels[5]);
  CHECK(labels[0] != labels[5]);

  const std::vector<int> one = cluster_nodes(s, 1);
  CHECK(std::all_of(one.begin(), one.end(), [](int l) { return l == 0; }));
  CHECK(cluster_nodes(s, 2) == labels);
}

TEST_CASE("adaptive regularisation examples") {
  SolverConfig cfg;
  Regularization r = adapt_regularization(cfg.tau_opt, cfg);
  CHECK(r.lambda_spe == doctest::Approx(0.1));
  CHECK(r.lambda_smo == doctest::Approx(0.1));
  CHECK(r.tau_freq == doctest::Approx(0.7));
  r = adapt_regularization(0.001, cfg);
  CHECK(r.lambda_spe == doctest::Approx(0.01));
  CHECK(r.tau_freq == doctest::Approx(0.8));
  r = adapt_regularization(1.5, cfg);
  CHECK(r.lambda_smo == doctest::Approx(0.2));
  CHECK(r.tau_freq == doctest::Approx(0.7));
  double prev = 0.0;
  for (double f = 0.0; f <= 2.0; f += 0.01) {
    const double l = adapt_regularization(f, cfg).lambda_spe;
    CHECK(l >= prev);
    prev = l;
  }
}

TEST_CASE("objective examples") {
  PoseGraph g = graph_from_weights(Eigen::MatrixXd::Zero(3, 3));
  g.nodes[1].pose = SE3(Mat3::Identity(), Vec3(1, 0, 0));
  g.nodes[2].pose = SE3(Mat3::Identity(), Vec3(2, 0, 0));
  g.edges.push_back({0, 1, SE3(), Mat6::Identity(), 1.0, EdgeKind::kOdometry});
  CHECK(pose_graph_objective(g, 0.0, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  g.edges.back().confidence = 0.5;
  CHECK(pose_graph_objective(g, 0.0, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
  // spectral edges are weighted by lambda_spe and confidence only
  g.edges.push_back({0, 2, SE3(), 100.0 * Mat6::Identity(), 0.5, EdgeKind::kSpectral});
  CHECK(pose_graph_objective(g, 2.0, 0.0) == doctest::Approx(0.5 + 4.0).epsilon(1e-12));
  CHECK(pose_graph_objective(g, 0.0, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
  // constant steps have no smoothness cost, a kink does
  CHECK(pose_graph_objective(g, 0.0, 5.0) == doctest::Approx(0.5).epsilon(1e-12));
  g.nodes[2].pose = SE3(Mat3::Identity(), Vec3(3, 0, 0));
  CHECK(pose_graph_objective(g, 0.0, 5.0) == doctest::Approx(0.5 + 5.0).epsilon(1e-12));
}

TEST_CASE("noise-free graph is a fixed point") {
  const CircleProblem p = circle_problem(1, 40, 0.0, 0.0);
  SolverConfig cfg;
  OptimizeReport rep;
  const PoseGraph out = optimize(p.graph, 0.1, 0.1, cfg, &rep);
  CHECK(rep.objective.back() < 1e-12);
  CHECK(compute_ate(poses_of(out), p.traj.truth) < 1e-9);
}

TEST_CASE("perturbed noise-free graph converges back") {
  CircleProblem p = circle_problem(2, 40, 0.0, 0.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.02);
  for (std::size_t i = 1; i < p.graph.nodes.size(); ++i) {
    Twist xi;
    for (int k = 0; k < 6; ++k) xi[k] = n(rng);
    p.graph.nodes[i].pose = p.graph.nodes[i].pose * se3_exp(xi);
  }
  SolverConfig cfg;
  OptimizeReport rep;
  const PoseGraph out = optimize(p.graph, 0.0, 0.1, cfg, &rep);
  CHECK(rep.converged);
  CHECK(rep.objective.back() < 1e-12);
  CHECK(compute_ate(poses_of(out), p.traj.truth) < 1e-6);
}

TEST_CASE("noisy circle: objective non-increasing, gauge fixed, drift reduced") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const CircleProblem p = circle_problem(seed, 100, 0.01, 0.5 * M_PI / 180.0);
    SolverConfig cfg;
    OptimizeReport rep;
    const PoseGraph out = optimize(p.graph, 0.1, 0.1, cfg, &rep);
    for (std::size_t i = 1; i < rep.objective.size(); ++i) CHECK(rep.objective[i] <= rep.objective[i - 1]);
    CHECK(out.nodes[0].pose.matrix() == p.graph.nodes[0].pose.matrix());
    CHECK(!rep.aborted);
    const double pre = compute_ate(poses_of(p.graph), p.traj.truth);
    const double post = compute_ate(poses_of(out), p.traj.truth);
    CHECK(post < pre);
  }
}

TEST_CASE("optimize rejects a broken odometry chain") {
  CircleProblem p = circle_problem(1, 20, 0.0, 0.0);
  p.graph.edges.erase(p.graph.edges.begin() + 7);
  CHECK_THROWS_AS(optimize(p.graph, 0.1, 0.1, SolverConfig{}), InvalidArgument);
}

TEST_CASE("smoothness term lowers the translation centroid of a jittered circle") {
  SynthSpec spec;
  spec.pose_count = 64;
  const SyntheticTrajectory traj = generate_trajectory(spec, 1);
  const std::vector<SE3> jittered = add_alternating_jitter(traj.truth, 0.01);
  std::vector<PoseEdge> edges;
  for (int i = 0; i + 1 < spec.pose_count; ++i) {
    PoseEdge e;
    e.from = i;
    e.to = i + 1;
    e.measured = jittered[static_cast<std::size_t>(i)].inverse() * jittered[static_cast<std::size_t>(i + 1)];
    e.information = Mat6::Identity();
    edges.push_back(e);
  }
  const PoseGraph g = make_pose_graph(jittered, traj.timestamps, edges);
  SpectralConfig sc;
  SolverConfig cfg;
  auto centroid = [&](double lambda_smo) {
    const PoseGraph out = optimize(g, 0.0, lambda_smo, cfg);
    return mean_translation_centroid(trajectory_signatures(pose_samples(poses_of(out), traj.timestamps, sc), sc));
  };
  CHECK(centroid(cfg.lambda_smo_base) < centroid(0.0));
}

TEST_CASE("candidate selection filters") {
  PoseGraph g = graph_from_weights(Eigen::MatrixXd::Zero(6, 6));
  for (int i = 0; i < 6; ++i) g.nodes[static_cast<std::size_t>(i)].pose = SE3(Mat3::Identity(), Vec3(0.1 * i, 0, 0));
  Descriptor d;
  d.freq[0] = 1.0;
  Descriptor other;
  other.grad[0] = 1.0;
  SpectralSignature s;
  s.centroids << 1, 1, 1, 0, 0, 0;
  SpectralSignature orth;
  orth.centroids << 0, 0, 0, 1, 1, 1;
  for (auto& n : g.nodes) {
    n.descriptor = d;
    n.signature = s;
  }
  g.nodes[3].descriptor = other;
  g.nodes[4].signature = orth;
  g.nodes[5].descriptor.reset();
  const std::vector<int> labels = {0, 0, 0, 0, 0, 1};
  SolverConfig cfg;
  SpectralConfig sc;
  const Mat6 base = 4.0 * Mat6::Identity();
  CandidateStats stats;
  std::vector<PoseEdge> edges = select_candidate_edges(g, labels, 0.7, cfg, sc, base, &stats);
  // pairs with gap > 1 in cluster 0: (0,2) (0,3) (0,4) (1,3) (1,4) (2,4); node 4 fails coherence
  CHECK(stats.below_coherence == 3);
  CHECK(stats.skipped_missing == 0);
  REQUIRE(edges.size() == 3);
  CHECK(edges[0].from == 0);
  CHECK(edges[0].to == 2);  // identical descriptors rank first
  for (const PoseEdge& e : edges) {
    CHECK(e.kind == EdgeKind::kSpectral);
    CHECK(e.to - e.from >= 2);
    const SE3 rel = g.nodes[static_cast<std::size_t>(e.from)].pose.inverse() * g.nodes[static_cast<std::size_t>(e.to)].pose;
    CHECK((e.measured.matrix() - rel.matrix()).norm() < 1e-15);
    const double conf = spectral_confidence(1.0, geometric_regularity(rel, sc), sc);
    CHECK(e.confidence == doctest::Approx(conf).epsilon(1e-6));
    CHECK((e.information - e.confidence * base).norm() < 1e-12);
  }
  cfg.candidates_per_cluster = 1;
  edges = select_candidate_edges(g, labels, 0.7, cfg, sc, base);
  CHECK(edges.size() == 1);
  // every node in one cluster: node 5 has no descriptor
  edges = select_candidate_edges(g, std::vector<int>(6, 0), 0.7, cfg, sc, base, &stats);
  CHECK(stats.skipped_missing == 4);
  CHECK_THROWS_AS(select_candidate_edges(g, {0, 0}, 0.7, cfg, sc, base), InvalidArgument);
}
