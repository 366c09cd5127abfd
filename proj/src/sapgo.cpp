#include "mipslam/sapgo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

namespace mipslam {

void SolverConfig::validate() const {
  require(tau_opt > 0.0 && tau_freq > 0.0, "SolverConfig: thresholds must be positive");
  require(lambda_spe_base >= 0.0 && lambda_smo_base >= 0.0, "SolverConfig: regularisation weights must be >= 0");
  require(clusters >= 1, "SolverConfig: cluster count must be >= 1");
  require(max_iterations >= 1, "SolverConfig: max_iterations must be >= 1");
  require(step_tolerance > 0.0 && initial_damping > 0.0 && max_damping > initial_damping,
          "SolverConfig: bad LM parameters");
  require(fd_step > 0.0, "SolverConfig: fd_step must be positive");
  require(candidates_per_cluster >= 0, "SolverConfig: candidates_per_cluster must be >= 0");
}

Adjacency build_adjacency(const PoseGraph& graph) {
  const auto n = static_cast<Eigen::Index>(graph.nodes.size());
  Adjacency out{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
  for (const PoseEdge& e : graph.edges) {
    const auto i = static_cast<Eigen::Index>(graph.index_of(e.from));
    const auto j = static_cast<Eigen::Index>(graph.index_of(e.to));
    if (i == j) continue;
    const double w = std::max(out.a(i, j), e.confidence);
    out.a(i, j) = out.a(j, i) = w;
  }
  out.d.diagonal() = out.a.rowwise().sum();
  return out;
}

Eigen::MatrixXd normalized_laplacian(const Eigen::MatrixXd& a, const Eigen::MatrixXd& d) {
  require(a.rows() == a.cols() && d.rows() == a.rows() && d.cols() == a.cols(),
          "normalized_laplacian: shape mismatch");
  const Eigen::Index n = a.rows();
  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i) inv_sqrt[i] = d(i, i) > 0.0 ? 1.0 / std::sqrt(d(i, i)) : 0.0;
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d(i, i) <= 0.0) continue;
    l(i, i) = (d(i, i) - a(i, i)) * inv_sqrt[i] * inv_sqrt[i];
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i && d(j, j) > 0.0) l(i, j) = -a(i, j) * inv_sqrt[i] * inv_sqrt[j];
  }
  return l;
}

LaplacianSpectrum laplacian_spectrum(const Eigen::MatrixXd& l) {
  require(l.rows() == l.cols(), "laplacian_spectrum: matrix must be square");
  require(l.allFinite(), "laplacian_spectrum: non-finite input");
  const Eigen::Index n = l.rows();
  if (n > 0) require((l - l.transpose()).cwiseAbs().maxCoeff() <= 1e-9, "laplacian_spectrum: matrix is not symmetric");

  Eigen::MatrixXd a = 0.5 * (l + l.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = std::max(a.squaredNorm(), std::numeric_limits<double>::min());
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off <= 1e-32 * scale) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });

  LaplacianSpectrum out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const Eigen::Index src = order[static_cast<std::size_t>(c)];
    double lam = a(src, src);
    if (lam < 0.0 && lam >= -1e-9) lam = 0.0;
    if (lam > 2.0 && lam <= 2.0 + 1e-9) lam = 2.0;
    out.eigenvalues[c] = lam;
    Eigen::VectorXd col = v.col(src);
    Eigen::Index lead = 0;
    for (Eigen::Index k = 1; k < n; ++k)
      if (std::abs(col[k]) > std::abs(col[lead]) + 1e-12) lead = k;
    if (col[lead] < 0.0) col = -col;
    out.eigenvectors.col(c) = col;
  }
  out.fiedler = n >= 2 ? out.eigenvalues[1] : 0.0;
  return out;
}

std::vector<int> spectral_cluster(const Eigen::MatrixXd& embedding, int k) {
  require(k >= 1, "spectral_cluster: k must be >= 1");
  const Eigen::Index n = embedding.rows();
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  if (k == 1 || n == 0) return labels;
  require(k <= n, "spectral_cluster: more clusters than nodes");

  Eigen::MatrixXd x = embedding;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double nr = x.row(i).norm();
    if (nr > 1e-12) x.row(i) /= nr;
    else x.row(i).setZero();
  }

  // Farthest-point seeding anchored at row 0; ties go to the lowest index.
  Eigen::MatrixXd centers(k, x.cols());
  centers.row(0) = x.row(0);
  Eigen::VectorXd dist = (x.rowwise() - x.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (dist[i] > dist[best]) best = i;
    centers.row(c) = x.row(best);
    dist = dist.cwiseMin((x.rowwise() - x.row(best)).rowwise().squaredNorm());
  }

  for (int iter = 0; iter < 50; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (x.row(i) - centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (x.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[static_cast<std::size_t>(i)] != best) {
        labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
      ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0) centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
    if (!changed && iter > 0) break;
  }
  return labels;
}

std::vector<int> cluster_nodes(const LaplacianSpectrum& spectrum, int k) {
  const Eigen::Index n = spectrum.eigenvectors.rows();
  const int kk = static_cast<int>(std::min<Eigen::Index>(k, n));
  if (kk <= 1) return std::vector<int>(static_cast<std::size_t>(n), 0);
  return spectral_cluster(spectrum.eigenvectors.leftCols(kk), kk);
}

Regularization adapt_regularization(double fiedler, const SolverConfig& cfg) {
  require(fiedler >= 0.0 || fiedler > -1e-9, "adapt_regularization: negative Fiedler value");
  const double scale = std::clamp(std::max(fiedler, 0.0) / cfg.tau_opt, 0.1, 2.0);
  Regularization r;
  r.lambda_spe = cfg.lambda_spe_base * scale;
  r.lambda_smo = cfg.lambda_smo_base * scale;
  r.tau_freq = fiedler < cfg.tau_opt ? cfg.tau_freq + 0.1 : cfg.tau_freq;
  return r;
}

std::vector<PoseEdge> select_candidate_edges(const PoseGraph& graph, const std::vector<int>& labels,
                                             double tau_freq, const SolverConfig& cfg,
                                             const SpectralConfig& spectral, const Mat6& base_information,
                                             CandidateStats* stats) {
  require(labels.size() == graph.nodes.size(), "select_candidate_edges: one label per node is required");
  CandidateStats st;
  struct Candidate {
    double similarity;
    std::size_t i, j;
    double confidence;
  };
  std::map<int, std::vector<Candidate>> per_cluster;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    for (std::size_t j = i + 2; j < graph.nodes.size(); ++j) {
      if (labels[i] != labels[j]) continue;
      const PoseNode& a = graph.nodes[i];
      const PoseNode& b = graph.nodes[j];
      if (!a.descriptor || !b.descriptor || !a.signature || !b.signature) {
        ++st.skipped_missing;
        continue;
      }
      const double coh = frequency_coherence(*a.signature, *b.signature, spectral);
      if (coh < tau_freq) {
        ++st.below_coherence;
        continue;
      }
      const double reg = geometric_regularity(a.pose.inverse() * b.pose, spectral);
      per_cluster[labels[i]].push_back(
          {descriptor_similarity(*a.descriptor, *b.descriptor), i, j, spectral_confidence(coh, reg, spectral)});
    }
  }
  std::vector<PoseEdge> out;
  for (auto& [label, cands] : per_cluster) {
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& x, const Candidate& y) { return x.similarity > y.similarity; });
    const std::size_t keep = std::min(cands.size(), static_cast<std::size_t>(cfg.candidates_per_cluster));
    for (std::size_t c = 0; c < keep; ++c) {
      const Candidate& cd = cands[c];
      PoseEdge e;
      e.from = graph.nodes[cd.i].id;
      e.to = graph.nodes[cd.j].id;
      e.measured = graph.nodes[cd.i].pose.inverse() * graph.nodes[cd.j].pose;
      e.confidence = std::clamp(cd.confidence, 0.0, 1.0);
      e.information = e.confidence * base_information;
      e.kind = EdgeKind::kSpectral;
      out.push_back(e);
    }
  }
  if (stats) *stats = st;
  return out;
}

namespace {

// One residual block of the stacked least-squares problem.
struct Block {
  enum Type { kEdge, kSmooth } type = kEdge;
  std::size_t n0 = 0, n1 = 0, n2 = 0;  // node positions (n2 only for smoothness)
  SE3 measured;
  Mat6 sqrt_info = Mat6::Identity();  // whitening for edges; scalar weight for smoothness
};

Mat6 sqrt_information(const Mat6& omega) {
  Eigen::SelfAdjointEigenSolver<Mat6> es(0.5 * (omega + omega.transpose()));
  const Vec6 lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return lam.asDiagonal() * es.eigenvectors().transpose();
}

std::vector<Block> make_blocks(const PoseGraph& g, double lambda_spe, double lambda_smo) {
  std::vector<Block> blocks;
  for (const PoseEdge& e : g.edges) {
    Block b;
    b.type = Block::kEdge;
    b.n0 = g.index_of(e.from);
    b.n1 = g.index_of(e.to);
    b.measured = e.measured;
    if (e.kind == EdgeKind::kSpectral) {
      if (lambda_spe <= 0.0 || e.confidence <= 0.0) continue;
      b.sqrt_info = std::sqrt(lambda_spe * e.confidence) * Mat6::Identity();
    } else {
      b.sqrt_info = sqrt_information(e.confidence * e.information);
    }
    blocks.push_back(b);
  }
  if (lambda_smo > 0.0) {
    for (std::size_t i = 0; i + 2 < g.nodes.size(); ++i) {
      Block b;
      b.type = Block::kSmooth;
      b.n0 = i;
      b.n1 = i + 1;
      b.n2 = i + 2;
      b.sqrt_info = std::sqrt(lambda_smo) * Mat6::Identity();
      blocks.push_back(b);
    }
  }
  return blocks;
}

Vec6 block_residual(const Block& b, const std::vector<SE3>& poses) {
  if (b.type == Block::kEdge) return b.sqrt_info * edge_residual(poses[b.n0], poses[b.n1], b.measured);
  const Twist xi0 = se3_log(poses[b.n0].inverse() * poses[b.n1]);
  const Twist xi1 = se3_log(poses[b.n1].inverse() * poses[b.n2]);
  return b.sqrt_info * (xi1 - xi0);
}

double objective_of(const std::vector<Block>& blocks, const std::vector<SE3>& poses) {
  double f = 0.0;
  for (const Block& b : blocks) f += block_residual(b, poses).squaredNorm();
  return f;
}

void check_odometry_connected(const PoseGraph& g) {
  std::vector<std::size_t> parent(g.nodes.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const PoseEdge& e : g.edges) {
    if (e.kind != EdgeKind::kOdometry) continue;
    parent[find(g.index_of(e.from))] = find(g.index_of(e.to));
  }
  for (std::size_t i = 1; i < g.nodes.size(); ++i)
    require(find(i) == find(0), "optimize: odometry edges do not connect every node");
}

}  // namespace

double pose_graph_objective(const PoseGraph& graph, double lambda_spe, double lambda_smo) {
  std::vector<SE3> poses;
  for (const PoseNode& n : graph.nodes) poses.push_back(n.pose);
  return objective_of(make_blocks(graph, lambda_spe, lambda_smo), poses);
}

PoseGraph optimize(const PoseGraph& graph, double lambda_spe, double lambda_smo, const SolverConfig& cfg,
                   OptimizeReport* report) {
  cfg.validate();
  require(lambda_spe >= 0.0 && lambda_smo >= 0.0, "optimize: regularisation weights must be >= 0");
  graph.validate();
  check_odometry_connected(graph);

  PoseGraph out = graph;
  OptimizeReport rep;
  const std::size_t n = graph.nodes.size();
  std::vector<SE3> poses;
  for (const PoseNode& node : graph.nodes) poses.push_back(node.pose);
  const std::vector<Block> blocks = make_blocks(graph, lambda_spe, lambda_smo);

  double f = objective_of(blocks, poses);
  rep.objective.push_back(f);
  double lambda = cfg.initial_damping;
  const auto dim = static_cast<Eigen::Index>(6 * (n > 0 ? n - 1 : 0));
  const double h = cfg.fd_step;

  for (int it = 0; it < cfg.max_iterations && dim > 0; ++it) {
    rep.iterations = it + 1;
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
    std::vector<SE3> work = poses;
    for (const Block& b : blocks) {
      const Vec6 r = block_residual(b, poses);
      std::size_t nodes_of[3] = {b.n0, b.n1, b.n2};
      const int count = b.type == Block::kSmooth ? 3 : 2;
      Eigen::Matrix<double, 6, Eigen::Dynamic> jac(6, 6 * count);
      for (int m = 0; m < count; ++m) {
        const std::size_t node = nodes_of[m];
        for (int d = 0; d < 6; ++d) {
          Vec6 e = Vec6::Zero();
          if (node == 0) {
            jac.col(6 * m + d).setZero();
            continue;
          }
          e[d] = h;
          work[node] = poses[node] * se3_exp(e);
          const Vec6 rp = block_residual(b, work);
          work[node] = poses[node] * se3_exp(-e);
          const Vec6 rm = block_residual(b, work);
          work[node] = poses[node];
          jac.col(6 * m + d) = (rp - rm) / (2.0 * h);
        }
      }
      for (int m = 0; m < count; ++m) {
        if (nodes_of[m] == 0) continue;
        const auto row0 = static_cast<Eigen::Index>(6 * (nodes_of[m] - 1));
        const auto jm = jac.middleCols(6 * m, 6);
        grad.segment<6>(row0) += jm.transpose() * r;
        for (int q = 0; q < count; ++q) {
          if (nodes_of[q] == 0) continue;
          const auto col0 = static_cast<Eigen::Index>(6 * (nodes_of[q] - 1));
          const Mat6 hb = jm.transpose() * jac.middleCols(6 * q, 6);
          for (int rr = 0; rr < 6; ++rr)
            for (int cc = 0; cc < 6; ++cc)
              if (hb(rr, cc) != 0.0) trip.emplace_back(row0 + rr, col0 + cc, hb(rr, cc));
        }
      }
    }
    Eigen::SparseMatrix<double> hess(dim, dim);
    hess.setFromTriplets(trip.begin(), trip.end());

    bool accepted = false;
    bool stop = false;
    while (!accepted) {
      Eigen::SparseMatrix<double> damped = hess;
      for (Eigen::Index i = 0; i < dim; ++i) damped.coeffRef(i, i) += lambda;
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(damped);
      Eigen::VectorXd delta;
      bool ok = solver.info() == Eigen::Success;
      if (ok) {
        delta = solver.solve(-grad);
        ok = solver.info() == Eigen::Success && delta.allFinite();
      }
      if (!ok) {
        lambda *= 10.0;
        if (lambda > cfg.max_damping) {
          rep.aborted = true;
          stop = true;
          break;
        }
        continue;
      }
      const double step_norm = delta.norm();
      std::vector<SE3> cand = poses;
      for (std::size_t k = 1; k < n; ++k)
        cand[k] = (poses[k] * se3_exp(delta.segment<6>(static_cast<Eigen::Index>(6 * (k - 1))))).normalized();
      const double fc = objective_of(blocks, cand);
      if (fc < f) {
        poses = std::move(cand);
        f = fc;
        rep.objective.push_back(f);
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        if (step_norm < cfg.step_tolerance) {
          rep.converged = true;
          stop = true;
        }
      } else {
        if (step_norm < cfg.step_tolerance) {
          rep.converged = true;
          stop = true;
          break;
        }
        lambda *= 10.0;
        if (lambda > cfg.max_damping) {
          rep.aborted = true;
          stop = true;
          break;
        }
      }
    }
    if (stop) break;
  }
  rep.final_damping = lambda;
  for (std::size_t k = 1; k < n; ++k) out.nodes[k].pose = poses[k];
  if (report) *report = std::move(rep);
  return out;
}

}  // namespace mipslam
