#include "mipslam/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace mipslam {

namespace {

void normalize_block(Eigen::VectorXd& v) {
  const double n = v.norm();
  if (n < 1e-12) {
    v.setZero();
  } else {
    v /= n;
  }
}

double hann(int n, int len) {
  if (len <= 1) return 1.0;
  return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / (len - 1)));
}

Eigen::VectorXd gradient_histogram(const Image& lum) {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(kGradBins);
  const int w = lum.width;
  const int ht = lum.height;
  for (int s = 1; s <= 2; ++s) {
    for (int y = s; y < ht - s; ++y) {
      for (int x = s; x < w - s; ++x) {
        auto p = [&](int dx, int dy) { return lum.at(x + dx * s, y + dy * s); };
        const double gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
        const double gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
        const double mag = std::hypot(gx, gy);
        if (mag == 0.0) continue;
        const double theta = std::atan2(gy, gx) + std::numbers::pi;  // [0, 2 pi]
        int bin = static_cast<int>(std::floor(theta / (2.0 * std::numbers::pi) * kGradBins));
        bin = std::clamp(bin, 0, kGradBins - 1);
        h[bin] += mag;
      }
    }
  }
  return h;
}

Eigen::VectorXd texture_responses(const Image& lum) {
  const auto& kernels = detail::texture_kernels();
  Eigen::VectorXd r = Eigen::VectorXd::Zero(kTexBins);
  const int w = lum.width;
  const int ht = lum.height;
  const double count = static_cast<double>(w - 4) * (ht - 4);
  for (int k = 0; k < kTexBins; ++k) {
    const auto& ker = kernels[static_cast<std::size_t>(k)];
    double acc = 0.0;
    for (int y = 2; y < ht - 2; ++y) {
      for (int x = 2; x < w - 2; ++x) {
        double v = 0.0;
        for (int j = 0; j < 5; ++j)
          for (int i = 0; i < 5; ++i) v += ker(j, i) * lum.at(x + i - 2, y + j - 2);
        acc += std::abs(v);
      }
    }
    r[k] = acc / count;
  }
  return r;
}

Eigen::VectorXd color_histogram(const Image& rgb) {
  Eigen::VectorXd h = Eigen::VectorXd::Zero(3 * kColorBinsPerChannel);
  for (std::size_t p = 0; p < rgb.pixel_count(); ++p) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(rgb.data[3 * p + static_cast<std::size_t>(c)], 0.0, 1.0);
      const int bin = std::min(kColorBinsPerChannel - 1, static_cast<int>(std::floor(v * kColorBinsPerChannel)));
      h[c * kColorBinsPerChannel + bin] += 1.0;
    }
  }
  return h;
}

}  // namespace

namespace detail {

Eigen::VectorXd radial_power_bins(const Image& lum) {
  const int w = lum.width;
  const int h = lum.height;
  double mean = 0.0;
  for (double v : lum.data) mean += v;
  mean /= static_cast<double>(lum.data.size());

  // Separable 2D transform: rows, then columns.
  Eigen::FFT<double> fft;
  std::vector<std::vector<std::complex<double>>> rows(static_cast<std::size_t>(h));
  std::vector<double> line(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    const double wy = hann(y, h);
    for (int x = 0; x < w; ++x) line[static_cast<std::size_t>(x)] = (lum.at(x, y) - mean) * wy * hann(x, w);
    std::vector<std::complex<double>> out;
    fft.fwd(out, line);
    rows[static_cast<std::size_t>(y)] = std::move(out);
  }
  Eigen::VectorXd bins = Eigen::VectorXd::Zero(kFreqBins);
  std::vector<std::complex<double>> col(static_cast<std::size_t>(h));
  std::vector<std::complex<double>> spec;
  for (int u = 0; u < w; ++u) {
    for (int y = 0; y < h; ++y) col[static_cast<std::size_t>(y)] = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(u)];
    fft.fwd(spec, col);
    const double fu = static_cast<double>(u <= w / 2 ? u : u - w) / w;
    for (int v = 0; v < h; ++v) {
      const double fv = static_cast<double>(v <= h / 2 ? v : v - h) / h;
      const double radius = std::sqrt(fu * fu + fv * fv);
      int bin = static_cast<int>(std::floor(radius / 0.5 * kFreqBins));
      bin = std::min(bin, kFreqBins - 1);
      bins[bin] += std::norm(spec[static_cast<std::size_t>(v)]);
    }
  }
  return bins;
}

const std::vector<Eigen::Matrix<double, 5, 5>>& texture_kernels() {
  static const std::vector<Eigen::Matrix<double, 5, 5>> kernels = [] {
    std::vector<Eigen::Matrix<double, 5, 5>> out;
    for (int family = 0; family < 4; ++family) {
      for (int o = 0; o < 4; ++o) {
        const double th = o * std::numbers::pi / 4.0;
        const double c = std::cos(th), s = std::sin(th);
        Eigen::Matrix<double, 5, 5> k;
        for (int j = 0; j < 5; ++j) {
          for (int i = 0; i < 5; ++i) {
            const double x = i - 2.0, y = j - 2.0;
            const double u = c * x + s * y;   // along the orientation
            const double v = -s * x + c * y;  // across it
            double val = 0.0;
            switch (family) {
              case 0:  // edge: first derivative across
                val = v * std::exp(-(u * u + v * v) / 2.0);
                break;
              case 1:  // bar: second derivative across
                val = (v * v - 1.0) * std::exp(-(u * u + v * v) / 2.0);
                break;
              case 2:  // spot: elongated blob
                val = std::exp(-(u * u / (2.0 * 1.5 * 1.5) + v * v / (2.0 * 0.6 * 0.6)));
                break;
              default:  // anisotropic Laplacian of Gaussian
              {
                const double su = 1.6, sv = 0.8;
                const double g = std::exp(-(u * u / (2 * su * su) + v * v / (2 * sv * sv)));
                val = (u * u / std::pow(su, 4) - 1.0 / (su * su) + v * v / std::pow(sv, 4) - 1.0 / (sv * sv)) * g;
              }
            }
            k(j, i) = val;
          }
        }
        k.array() -= k.mean();
        k /= k.cwiseAbs().sum();
        out.push_back(k);
      }
    }
    return out;
  }();
  return kernels;
}

}  // namespace detail

Eigen::VectorXd Descriptor::concatenated() const {
  Eigen::VectorXd v(kDescriptorDim);
  v << freq, grad, tex, color;
  return v;
}

Descriptor Descriptor::from_concatenated(const Eigen::VectorXd& v) {
  require(v.size() == kDescriptorDim, "Descriptor: wrong dimension");
  Descriptor d;
  d.freq = v.segment(0, kFreqBins);
  d.grad = v.segment(kFreqBins, kGradBins);
  d.tex = v.segment(kFreqBins + kGradBins, kTexBins);
  d.color = v.segment(kFreqBins + kGradBins + kTexBins, 3 * kColorBinsPerChannel);
  return d;
}

Descriptor extract_descriptor(const Image& rgb) {
  require(rgb.channels == 3, "extract_descriptor: expected an RGB image");
  require(rgb.width >= 16 && rgb.height >= 16, "extract_descriptor: image must be at least 16x16");
  const Image lum = luminance(rgb);
  Descriptor d;
  d.freq = detail::radial_power_bins(lum);
  d.grad = gradient_histogram(lum);
  d.tex = texture_responses(lum);
  d.color = color_histogram(rgb);
  normalize_block(d.freq);
  normalize_block(d.grad);
  normalize_block(d.tex);
  normalize_block(d.color);
  return d;
}

double descriptor_similarity(const Descriptor& a, const Descriptor& b) {
  const Eigen::VectorXd va = a.concatenated();
  const Eigen::VectorXd vb = b.concatenated();
  const double na = va.norm();
  const double nb = vb.norm();
  if (na == 0.0 && nb == 0.0) return 0.0;
  const double cosine = (na > 0.0 && nb > 0.0) ? va.dot(vb) / (na * nb) : 0.0;
  return 0.5 * (1.0 + cosine) + std::exp(-(va - vb).norm());
}

}  // namespace mipslam
