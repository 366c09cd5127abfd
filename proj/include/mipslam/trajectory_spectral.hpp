#pragma once

#include <complex>
#include <vector>

#include <Eigen/Core>

#include "mipslam/lie.hpp"

namespace mipslam {

/// p = [t; omega] plus a timestamp in seconds.
struct PoseSample {
  Vec6 components = Vec6::Zero();
  double timestamp = 0.0;
};

/// Per-dimension power-weighted frequency centroid, in DFT bin units.
struct SpectralSignature {
  Vec6 centroids = Vec6::Zero();
};

struct SpectralConfig {
  int window = 32;
  int hop = 16;
  double eps_reg = 1e-8;
  double alpha_t = 1.0;  // 1/m
  double alpha_r = 1.0;  // 1/rad
  double beta_c = 0.5;
  double beta_g = 0.5;
  /// Rotation components from consecutive relative rotations instead of
  /// absolute orientation.
  bool incremental_rotation = false;
  /// Subtract each window's per-dimension mean before the transform.
  bool remove_mean = false;

  int omega_max() const { return window / 2; }
  void validate() const;
};

using WindowSpectrum = Eigen::Matrix<std::complex<double>, 6, Eigen::Dynamic>;

/// Hann-windowed DFT of poses[k .. k + window - 1] at bins 0..omega_max.
/// `k` is a 0-based start index.
WindowSpectrum sliding_window_dft(const std::vector<PoseSample>& poses, int k, const SpectralConfig& cfg);

SpectralSignature spectral_signature(const WindowSpectrum& dft, const SpectralConfig& cfg);

/// 1/2 (1 + <a, b> / (|a||b| + eps)).
double frequency_coherence(const SpectralSignature& a, const SpectralSignature& b, const SpectralConfig& cfg);

/// exp(-alpha_t |t| - alpha_r |omega|) with (t, omega) = se3_log(rel).
double geometric_regularity(const SE3& rel, const SpectralConfig& cfg);

/// beta_c * coh + beta_g * reg.
double spectral_confidence(double coh, double reg, const SpectralConfig& cfg);

struct WindowSignature {
  int start = 0;  // 0-based
  SpectralSignature signature;
};

struct TrajectorySignatures {
  std::vector<WindowSignature> windows;
  /// For every pose, the window whose centre is nearest (lower start on ties).
  std::vector<int> pose_window;

  const SpectralSignature& for_pose(std::size_t i) const {
    return windows[static_cast<std::size_t>(pose_window[i])].signature;
  }
};

TrajectorySignatures trajectory_signatures(const std::vector<PoseSample>& poses, const SpectralConfig& cfg);

/// Components from absolute poses: translation, then the rotation part of
/// se3_log (or the relative rotation to the previous pose when configured).
std::vector<PoseSample> pose_samples(const std::vector<SE3>& poses, const std::vector<double>& timestamps,
                                     const SpectralConfig& cfg);

/// Mean translation centroid (dimensions 0..2) over all windows.
double mean_translation_centroid(const TrajectorySignatures& sigs);

}  // namespace mipslam
