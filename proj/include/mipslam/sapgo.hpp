#pragma once

#include <vector>

#include <Eigen/Core>

#include "mipslam/pose_graph.hpp"
#include "mipslam/trajectory_spectral.hpp"

namespace mipslam {

struct SolverConfig {
  double tau_opt = 0.05;
  double tau_freq = 0.7;
  double lambda_spe_base = 0.1;
  double lambda_smo_base = 0.1;
  int clusters = 4;
  int max_iterations = 100;
  double step_tolerance = 1e-8;
  double initial_damping = 1e-4;
  double max_damping = 1e8;
  double fd_step = 1e-6;
  int candidates_per_cluster = 10;

  void validate() const;
};

struct Adjacency {
  Eigen::MatrixXd a;  // symmetric, zero diagonal
  Eigen::MatrixXd d;  // diagonal degree matrix
};

/// A_ij = max confidence over the edges joining i and j.
Adjacency build_adjacency(const PoseGraph& graph);

/// D^-1/2 (D - A) D^-1/2; isolated nodes get an all-zero row and column.
Eigen::MatrixXd normalized_laplacian(const Eigen::MatrixXd& a, const Eigen::MatrixXd& d);

struct LaplacianSpectrum {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // columns match eigenvalues
  double fiedler = 0.0;
};

/// Cyclic Jacobi eigendecomposition. Throws InvalidArgument when the input
/// is not symmetric within 1e-9.
LaplacianSpectrum laplacian_spectrum(const Eigen::MatrixXd& l);

/// Row-normalised k-means over the rows of `embedding` (n x k). Seeds from
/// row 0, then repeatedly the row farthest from the chosen seeds.
std::vector<int> spectral_cluster(const Eigen::MatrixXd& embedding, int k);

/// Clusters the graph nodes using the eigenvectors of the k smallest
/// eigenvalues as the embedding.
std::vector<int> cluster_nodes(const LaplacianSpectrum& spectrum, int k);

struct Regularization {
  double lambda_spe = 0.0;
  double lambda_smo = 0.0;
  double tau_freq = 0.0;
};

Regularization adapt_regularization(double fiedler, const SolverConfig& cfg);

struct CandidateStats {
  int skipped_missing = 0;
  int below_coherence = 0;
};

/// Same-cluster pairs with an index gap above one whose coherence reaches
/// tau_freq, ranked by descriptor similarity, at most
/// cfg.candidates_per_cluster per cluster.
std::vector<PoseEdge> select_candidate_edges(const PoseGraph& graph, const std::vector<int>& labels,
                                             double tau_freq, const SolverConfig& cfg,
                                             const SpectralConfig& spectral, const Mat6& base_information,
                                             CandidateStats* stats = nullptr);

struct OptimizeReport {
  std::vector<double> objective;  // initial value, then after every accepted step
  int iterations = 0;
  double final_damping = 0.0;
  bool converged = false;
  bool aborted = false;
};

/// E_geo (odometry and loop edges, information scaled by confidence)
/// + lambda_spe * sum over spectral edges of S_ij |r_ij|^2
/// + lambda_smo * sum_i |xi_{i+1} - xi_i|^2, xi_i = log(T_i^-1 T_{i+1}).
double pose_graph_objective(const PoseGraph& graph, double lambda_spe, double lambda_smo);

/// Levenberg-Marquardt over right perturbations T_i exp(xi_i) with node 0
/// fixed. Throws InvalidArgument when the odometry edges do not connect all
/// nodes.
PoseGraph optimize(const PoseGraph& graph, double lambda_spe, double lambda_smo, const SolverConfig& cfg,
                   OptimizeReport* report = nullptr);

}  // namespace mipslam
