#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mipslam/descriptors.hpp"
#include "mipslam/image.hpp"
#include "mipslam/pose_graph.hpp"
#include "mipslam/scene.hpp"

namespace mipslam {

/// Raised for unreadable or malformed files.
class IoError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Images: binary P6 with 8-bit channels; values are clamped and rounded.
void write_ppm(const std::filesystem::path& path, const Image& rgb);
Image read_ppm(const std::filesystem::path& path);

// Depth: "MIPD", u32 width, u32 height, u32 reserved, then float32 LE rows.
void write_depth(const std::filesystem::path& path, const Image& depth);
Image read_depth(const std::filesystem::path& path);

/// One text row per image row; channels separated by commas within a pixel.
void write_text_matrix(const std::filesystem::path& path, const Image& img);

nlohmann::json to_json(const Gaussian3D& g);
Gaussian3D gaussian_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Scene& s);
Scene scene_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Camera& c);
Camera camera_from_json(const nlohmann::json& j);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

struct StampedPose {
  double timestamp = 0.0;
  SE3 pose;
};

/// "timestamp tx ty tz qx qy qz qw" lines, '#' comments.
void write_tum(const std::filesystem::path& path, const std::vector<StampedPose>& poses);
std::vector<StampedPose> read_tum(const std::filesystem::path& path);

/// VERTEX_SE3:QUAT / EDGE_SE3:QUAT with 21 upper-triangular information
/// entries and a trailing "# CONF c KIND k" tag.
void write_g2o(const std::filesystem::path& path, const PoseGraph& graph);
PoseGraph read_g2o(const std::filesystem::path& path);
std::string g2o_string(const PoseGraph& graph);
PoseGraph parse_g2o(const std::string& text);

/// One text header line, then kDescriptorDim float32 LE values per record.
void write_descriptors(const std::filesystem::path& path, const std::vector<Descriptor>& descriptors);
std::vector<Descriptor> read_descriptors(const std::filesystem::path& path);

}  // namespace mipslam
