#include "mipslam/trajectory_spectral.hpp"

#include <cmath>
#include <numbers>

namespace mipslam {

void SpectralConfig::validate() const {
  require(window >= 4, "SpectralConfig: window must be >= 4");
  require(hop >= 1, "SpectralConfig: hop must be >= 1");
  require(eps_reg >= 0.0, "SpectralConfig: eps_reg must be >= 0");
  require(alpha_t >= 0.0 && alpha_r >= 0.0, "SpectralConfig: alpha_t and alpha_r must be >= 0");
  require(beta_c >= 0.0 && beta_g >= 0.0 && std::abs(beta_c + beta_g - 1.0) <= 1e-12,
          "SpectralConfig: beta_c + beta_g must equal 1");
}

WindowSpectrum sliding_window_dft(const std::vector<PoseSample>& poses, int k, const SpectralConfig& cfg) {
  cfg.validate();
  require(k >= 0, "sliding_window_dft: negative start index");
  require(static_cast<std::size_t>(k) + static_cast<std::size_t>(cfg.window) <= poses.size(),
          "sliding_window_dft: window extends past the end of the trajectory");
  const int n_w = cfg.window;
  const int w_max = cfg.omega_max();

  Eigen::Matrix<double, 6, Eigen::Dynamic> x(6, n_w);
  for (int n = 0; n < n_w; ++n) x.col(n) = poses[static_cast<std::size_t>(k + n)].components;
  if (cfg.remove_mean) {
    const Vec6 mean = x.rowwise().mean();
    x.colwise() -= mean;
  }
  for (int n = 0; n < n_w; ++n)
    x.col(n) *= 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / (n_w - 1)));

  WindowSpectrum f(6, w_max + 1);
  for (int w = 0; w <= w_max; ++w) {
    for (int d = 0; d < 6; ++d) {
      std::complex<double> acc(0.0, 0.0);
      for (int n = 0; n < n_w; ++n) {
        const double ph = -2.0 * std::numbers::pi * static_cast<double>(w) * n / n_w;
        acc += x(d, n) * std::complex<double>(std::cos(ph), std::sin(ph));
      }
      f(d, w) = acc;
    }
  }
  return f;
}

SpectralSignature spectral_signature(const WindowSpectrum& dft, const SpectralConfig& cfg) {
  SpectralSignature s;
  for (int d = 0; d < 6; ++d) {
    double num = 0.0;
    double den = 0.0;
    for (int w = 0; w < dft.cols(); ++w) {
      const double p = std::norm(dft(d, w));
      num += w * p;
      den += p;
    }
    s.centroids[d] = num / (den + cfg.eps_reg);
  }
  return s;
}

double frequency_coherence(const SpectralSignature& a, const SpectralSignature& b, const SpectralConfig& cfg) {
  const double dot = a.centroids.dot(b.centroids);
  return 0.5 * (1.0 + dot / (a.centroids.norm() * b.centroids.norm() + cfg.eps_reg));
}

double geometric_regularity(const SE3& rel, const SpectralConfig& cfg) {
  const Twist xi = se3_log(rel);
  return std::exp(-cfg.alpha_t * twist_translation(xi).norm() - cfg.alpha_r * twist_rotation(xi).norm());
}

double spectral_confidence(double coh, double reg, const SpectralConfig& cfg) {
  cfg.validate();
  return cfg.beta_c * coh + cfg.beta_g * reg;
}

TrajectorySignatures trajectory_signatures(const std::vector<PoseSample>& poses, const SpectralConfig& cfg) {
  cfg.validate();
  require(poses.size() >= static_cast<std::size_t>(cfg.window),
          "trajectory_signatures: trajectory shorter than the window");
  for (std::size_t i = 0; i < poses.size(); ++i) {
    require(poses[i].components.allFinite(), "trajectory_signatures: non-finite pose component");
    require(i == 0 || poses[i].timestamp > poses[i - 1].timestamp,
            "trajectory_signatures: timestamps must be strictly increasing");
  }
  TrajectorySignatures out;
  for (std::size_t k = 0; k + static_cast<std::size_t>(cfg.window) <= poses.size();
       k += static_cast<std::size_t>(cfg.hop)) {
    const int start = static_cast<int>(k);
    out.windows.push_back({start, spectral_signature(sliding_window_dft(poses, start, cfg), cfg)});
  }
  const double half = 0.5 * (cfg.window - 1);
  out.pose_window.resize(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    int best = 0;
    double best_d = std::abs(out.windows[0].start + half - static_cast<double>(i));
    for (std::size_t w = 1; w < out.windows.size(); ++w) {
      const double d = std::abs(out.windows[w].start + half - static_cast<double>(i));
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(w);
      }
    }
    out.pose_window[i] = best;
  }
  return out;
}

std::vector<PoseSample> pose_samples(const std::vector<SE3>& poses, const std::vector<double>& timestamps,
                                     const SpectralConfig& cfg) {
  require(poses.size() == timestamps.size(), "pose_samples: pose/timestamp count mismatch");
  std::vector<PoseSample> out(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    out[i].timestamp = timestamps[i];
    out[i].components.head<3>() = poses[i].translation();
    if (cfg.incremental_rotation) {
      out[i].components.tail<3>() =
          i == 0 ? Vec3::Zero() : so3_log(poses[i - 1].rotation().transpose() * poses[i].rotation());
    } else {
      out[i].components.tail<3>() = twist_rotation(se3_log(poses[i]));
    }
  }
  return out;
}

double mean_translation_centroid(const TrajectorySignatures& sigs) {
  if (sigs.windows.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& w : sigs.windows) acc += w.signature.centroids.head<3>().sum() / 3.0;
  return acc / static_cast<double>(sigs.windows.size());
}

}  // namespace mipslam
