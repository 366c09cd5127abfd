#include "mipslam/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mipslam {

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  return f;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary) {
  std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  return f;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("unexpected end of file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, double v) { put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
double get_f32(std::istream& is) { return static_cast<double>(std::bit_cast<float>(get_u32(is))); }

// Skips whitespace and '#' comments in a PNM header.
int read_pnm_int(std::istream& is) {
  int c = is.peek();
  while (c != EOF) {
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      break;
    }
    c = is.peek();
  }
  int v = 0;
  if (!(is >> v)) throw IoError("malformed PPM header");
  return v;
}

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd json_vec(const nlohmann::json& j, Eigen::Index n, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n)
    throw IoError(std::string("expected an array of ") + std::to_string(n) + " numbers for '" + what + "'");
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Image& rgb) {
  require(rgb.channels == 3, "write_ppm: expected an RGB image");
  auto f = open_out(path, true);
  f << "P6\n" << rgb.width << " " << rgb.height << "\n255\n";
  std::vector<unsigned char> buf(rgb.data.size());
  for (std::size_t i = 0; i < buf.size(); ++i)
    buf[i] = static_cast<unsigned char>(std::lround(std::clamp(rgb.data[i], 0.0, 1.0) * 255.0));
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

Image read_ppm(const std::filesystem::path& path) {
  auto f = open_in(path, true);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw IoError("'" + path.string() + "' is not a binary PPM");
  const int w = read_pnm_int(f);
  const int h = read_pnm_int(f);
  const int maxval = read_pnm_int(f);
  if (w < 1 || h < 1 || maxval != 255) throw IoError("unsupported PPM header in '" + path.string() + "'");
  f.get();
  Image img(w, h, 3);
  std::vector<unsigned char> buf(img.data.size());
  if (!f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw IoError("truncated PPM '" + path.string() + "'");
  for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = buf[i] / 255.0;
  return img;
}

void write_depth(const std::filesystem::path& path, const Image& depth) {
  require(depth.channels == 1, "write_depth: expected a single-channel image");
  auto f = open_out(path, true);
  f.write("MIPD", 4);
  put_u32(f, static_cast<std::uint32_t>(depth.width));
  put_u32(f, static_cast<std::uint32_t>(depth.height));
  put_u32(f, 0);
  for (double v : depth.data) put_f32(f, v);
}

Image read_depth(const std::filesystem::path& path) {
  auto f = open_in(path, true);
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, "MIPD", 4) != 0)
    throw IoError("'" + path.string() + "' is not a MIPD depth file");
  const std::uint32_t w = get_u32(f);
  const std::uint32_t h = get_u32(f);
  get_u32(f);
  if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16)) throw IoError("bad MIPD dimensions");
  Image img(static_cast<int>(w), static_cast<int>(h), 1);
  for (double& v : img.data) v = get_f32(f);
  return img;
}

void write_text_matrix(const std::filesystem::path& path, const Image& img) {
  auto f = open_out(path, false);
  f << std::setprecision(9);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (x) f << ' ';
      for (int c = 0; c < img.channels; ++c) {
        if (c) f << ',';
        f << img.at(x, y, c);
      }
    }
    f << '\n';
  }
}

nlohmann::json to_json(const Gaussian3D& g) {
  Gaussian3D c = g;
  c.canonicalize();
  return {{"center", vec_json(c.center)},
          {"quaternion", {c.orientation.w(), c.orientation.x(), c.orientation.y(), c.orientation.z()}},
          {"scales", vec_json(c.scales)},
          {"opacity", c.opacity},
          {"color", vec_json(c.color)},
          {"sampling_frequency", c.sampling_frequency}};
}

Gaussian3D gaussian_from_json(const nlohmann::json& j) {
  try {
    Gaussian3D g;
    g.center = json_vec(j.at("center"), 3, "center");
    const Eigen::VectorXd q = json_vec(j.at("quaternion"), 4, "quaternion");
    g.orientation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
    g.scales = json_vec(j.at("scales"), 3, "scales");
    g.opacity = j.at("opacity").get<double>();
    g.color = json_vec(j.at("color"), 3, "color");
    g.sampling_frequency = j.value("sampling_frequency", 0.0);
    if (std::abs(g.orientation.norm() - 1.0) <= 1e-6) g.canonicalize();
    validate(g);
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed Gaussian: ") + e.what());
  }
}

nlohmann::json to_json(const Scene& s) {
  nlohmann::json gs = nlohmann::json::array();
  for (const auto& g : s.gaussians) gs.push_back(to_json(g));
  return {{"background_color", vec_json(s.background_color)}, {"gaussians", gs}};
}

Scene scene_from_json(const nlohmann::json& j) {
  try {
    Scene s;
    s.background_color = json_vec(j.at("background_color"), 3, "background_color");
    for (const auto& g : j.at("gaussians")) s.gaussians.push_back(gaussian_from_json(g));
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed scene: ") + e.what());
  }
}

nlohmann::json to_json(const Camera& c) {
  const Mat4 m = c.pose.matrix();
  nlohmann::json pose = nlohmann::json::array();
  for (int r = 0; r < 4; ++r)
    for (int k = 0; k < 4; ++k) pose.push_back(m(r, k));
  return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy},
          {"width", c.width}, {"height", c.height}, {"pose", pose}};
}

Camera camera_from_json(const nlohmann::json& j) {
  try {
    Camera c;
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    const Eigen::VectorXd p = json_vec(j.at("pose"), 16, "pose");
    Mat4 m;
    for (int r = 0; r < 4; ++r)
      for (int k = 0; k < 4; ++k) m(r, k) = p[4 * r + k];
    c.pose = SE3::from_matrix(m);
    validate(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed camera: ") + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto f = open_out(path, false);
  f << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  auto f = open_in(path, false);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse '" + path.string() + "': " + e.what());
  }
}

void write_tum(const std::filesystem::path& path, const std::vector<StampedPose>& poses) {
  auto f = open_out(path, false);
  f << "# timestamp tx ty tz qx qy qz qw\n" << std::setprecision(17);
  for (const auto& p : poses) {
    const auto q = p.pose.quaternion();
    const Vec3& t = p.pose.translation();
    f << p.timestamp << ' ' << t.x() << ' ' << t.y() << ' ' << t.z() << ' ' << q.x() << ' ' << q.y() << ' '
      << q.z() << ' ' << q.w() << '\n';
  }
}

std::vector<StampedPose> read_tum(const std::filesystem::path& path) {
  auto f = open_in(path, false);
  std::vector<StampedPose> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    double v[8];
    int n = 0;
    while (n < 8 && ss >> v[n]) ++n;
    if (n == 0) continue;
    std::string rest;
    if (n != 8 || (ss >> rest)) throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 8 values");
    Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (q.norm() < 1e-9) throw IoError(path.string() + ":" + std::to_string(lineno) + ": zero quaternion");
    out.push_back({v[0], SE3::from_quaternion(q.normalized(), Vec3(v[1], v[2], v[3]))});
  }
  return out;
}

std::string g2o_string(const PoseGraph& graph) {
  std::ostringstream f;
  f << std::setprecision(17);
  for (const auto& n : graph.nodes) {
    const auto q = n.pose.quaternion();
    const Vec3& t = n.pose.translation();
    f << "VERTEX_SE3:QUAT " << n.id << ' ' << t.x() << ' ' << t.y() << ' ' << t.z() << ' ' << q.x() << ' '
      << q.y() << ' ' << q.z() << ' ' << q.w() << '\n';
  }
  for (const auto& e : graph.edges) {
    const auto q = e.measured.quaternion();
    const Vec3& t = e.measured.translation();
    f << "EDGE_SE3:QUAT " << e.from << ' ' << e.to << ' ' << t.x() << ' ' << t.y() << ' ' << t.z() << ' '
      << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << q.w();
    for (int r = 0; r < 6; ++r)
      for (int c = r; c < 6; ++c) f << ' ' << e.information(r, c);
    f << " # CONF " << e.confidence << " KIND " << to_string(e.kind) << '\n';
  }
  return f.str();
}

void write_g2o(const std::filesystem::path& path, const PoseGraph& graph) {
  auto f = open_out(path, false);
  f << g2o_string(graph);
}

PoseGraph parse_g2o(const std::string& text) {
  PoseGraph g;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) { throw IoError("g2o line " + std::to_string(lineno) + ": " + what); };
  while (std::getline(in, line)) {
    ++lineno;
    std::string tag_part;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      tag_part = line.substr(hash + 1);
      line.resize(hash);
    }
    std::istringstream ss(line);
    std::string kind;
    if (!(ss >> kind)) continue;
    if (kind == "VERTEX_SE3:QUAT") {
      PoseNode n;
      double v[7];
      if (!(ss >> n.id)) fail("missing vertex id");
      for (double& x : v)
        if (!(ss >> x)) fail("vertex needs 7 pose values");
      Eigen::Quaterniond q(v[6], v[3], v[4], v[5]);
      if (q.norm() < 1e-9) fail("zero quaternion");
      n.pose = SE3::from_quaternion(q.normalized(), Vec3(v[0], v[1], v[2]));
      n.timestamp = static_cast<double>(n.id);
      g.nodes.push_back(n);
    } else if (kind == "EDGE_SE3:QUAT") {
      PoseEdge e;
      double v[7];
      if (!(ss >> e.from >> e.to)) fail("missing edge endpoints");
      for (double& x : v)
        if (!(ss >> x)) fail("edge needs 7 pose values");
      Eigen::Quaterniond q(v[6], v[3], v[4], v[5]);
      if (q.norm() < 1e-9) fail("zero quaternion");
      e.measured = SE3::from_quaternion(q.normalized(), Vec3(v[0], v[1], v[2]));
      for (int r = 0; r < 6; ++r)
        for (int c = r; c < 6; ++c) {
          double x;
          if (!(ss >> x)) fail("edge needs 21 information values");
          e.information(r, c) = e.information(c, r) = x;
        }
      e.confidence = 1.0;
      e.kind = EdgeKind::kOdometry;
      std::istringstream ts(tag_part);
      std::string key;
      while (ts >> key) {
        if (key == "CONF") {
          if (!(ts >> e.confidence)) fail("bad CONF value");
        } else if (key == "KIND") {
          std::string k;
          if (!(ts >> k)) fail("bad KIND value");
          e.kind = edge_kind_from_string(k);
        }
      }
      g.edges.push_back(e);
    } else {
      fail("unknown record '" + kind + "'");
    }
  }
  std::stable_sort(g.nodes.begin(), g.nodes.end(), [](const PoseNode& a, const PoseNode& b) { return a.id < b.id; });
  g.validate();
  return g;
}

PoseGraph read_g2o(const std::filesystem::path& path) {
  auto f = open_in(path, false);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_g2o(ss.str());
}

void write_descriptors(const std::filesystem::path& path, const std::vector<Descriptor>& descriptors) {
  auto f = open_out(path, true);
  f << "MIPDESC dim=" << kDescriptorDim << " count=" << descriptors.size() << " float32le\n";
  for (const auto& d : descriptors) {
    const Eigen::VectorXd v = d.concatenated();
    for (Eigen::Index i = 0; i < v.size(); ++i) put_f32(f, v[i]);
  }
}

std::vector<Descriptor> read_descriptors(const std::filesystem::path& path) {
  auto f = open_in(path, true);
  std::string header;
  std::getline(f, header);
  int dim = 0;
  std::size_t count = 0;
  if (std::sscanf(header.c_str(), "MIPDESC dim=%d count=%zu", &dim, &count) != 2 || dim != kDescriptorDim)
    throw IoError("'" + path.string() + "' is not a descriptor file");
  std::vector<Descriptor> out;
  for (std::size_t k = 0; k < count; ++k) {
    Eigen::VectorXd v(kDescriptorDim);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = get_f32(f);
    out.push_back(Descriptor::from_concatenated(v));
  }
  return out;
}

}  // namespace mipslam
