#include "mipslam/pose_graph.hpp"

#include <set>

#include <Eigen/Eigenvalues>

namespace mipslam {

const char* to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::kOdometry: return "odometry";
    case EdgeKind::kLoop: return "loop";
    case EdgeKind::kSpectral: return "spectral";
  }
  return "odometry";
}

EdgeKind edge_kind_from_string(const std::string& s) {
  if (s == "odometry") return EdgeKind::kOdometry;
  if (s == "loop") return EdgeKind::kLoop;
  if (s == "spectral") return EdgeKind::kSpectral;
  throw InvalidArgument("unknown edge kind '" + s + "'");
}

std::size_t PoseGraph::index_of(int id) const {
  // Graphs built here use id == position; fall back to a scan otherwise.
  if (id >= 0 && static_cast<std::size_t>(id) < nodes.size() && nodes[static_cast<std::size_t>(id)].id == id)
    return static_cast<std::size_t>(id);
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return i;
  throw InvalidArgument("PoseGraph: unknown node id " + std::to_string(id));
}

void PoseGraph::validate() const {
  std::set<int> ids;
  for (const PoseNode& n : nodes) {
    require(ids.insert(n.id).second, "PoseGraph: duplicate node id " + std::to_string(n.id));
    require(n.pose.is_valid(1e-6), "PoseGraph: node pose is not a valid SE3");
  }
  for (const PoseEdge& e : edges) {
    require(e.from != e.to, "PoseGraph: self-loop edge");
    require(ids.count(e.from) && ids.count(e.to), "PoseGraph: edge references a missing node");
    require(e.confidence >= 0.0 && e.confidence <= 1.0, "PoseGraph: confidence must lie in [0, 1]");
    require(e.information.allFinite() && (e.information - e.information.transpose()).cwiseAbs().maxCoeff() <= 1e-9,
            "PoseGraph: information matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat6> es(e.information, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() >= -1e-10, "PoseGraph: information matrix must be PSD");
  }
}

Twist edge_residual(const SE3& ti, const SE3& tj, const SE3& measured) {
  return se3_log(measured.inverse() * ti.inverse() * tj);
}

}  // namespace mipslam
