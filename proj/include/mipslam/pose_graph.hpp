#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mipslam/descriptors.hpp"
#include "mipslam/lie.hpp"
#include "mipslam/trajectory_spectral.hpp"

namespace mipslam {

enum class EdgeKind { kOdometry, kLoop, kSpectral };

const char* to_string(EdgeKind k);
EdgeKind edge_kind_from_string(const std::string& s);

struct PoseNode {
  int id = 0;
  SE3 pose;
  std::optional<Descriptor> descriptor;
  std::optional<SpectralSignature> signature;
  double timestamp = 0.0;
};

/// Constraint T_from^-1 T_to ~ measured.
struct PoseEdge {
  int from = 0;
  int to = 1;
  SE3 measured;
  Mat6 information = Mat6::Identity();
  double confidence = 1.0;
  EdgeKind kind = EdgeKind::kOdometry;
};

/// Nodes are kept in trajectory order; node 0 is the gauge anchor.
struct PoseGraph {
  std::vector<PoseNode> nodes;
  std::vector<PoseEdge> edges;

  /// Position of the node with this id; throws InvalidArgument if absent.
  std::size_t index_of(int id) const;
  void validate() const;
};

/// log(T_ij^-1 T_i^-1 T_j).
Twist edge_residual(const SE3& ti, const SE3& tj, const SE3& measured);

}  // namespace mipslam
