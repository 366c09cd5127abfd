#pragma once

#include <Eigen/Core>
#include <vector>

#include "mipslam/image.hpp"

namespace mipslam {

inline constexpr int kFreqBins = 32;
inline constexpr int kGradBins = 16;
inline constexpr int kTexBins = 16;
inline constexpr int kColorBinsPerChannel = 16;
inline constexpr int kDescriptorDim = kFreqBins + kGradBins + kTexBins + 3 * kColorBinsPerChannel;

/// Four independently L2-normalised blocks; a block whose raw norm is below
/// 1e-12 is left at zero.
struct Descriptor {
  Eigen::VectorXd freq = Eigen::VectorXd::Zero(kFreqBins);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(kGradBins);
  Eigen::VectorXd tex = Eigen::VectorXd::Zero(kTexBins);
  Eigen::VectorXd color = Eigen::VectorXd::Zero(3 * kColorBinsPerChannel);

  Eigen::VectorXd concatenated() const;
  static Descriptor from_concatenated(const Eigen::VectorXd& v);
};

/// Requires at least 16x16 RGB input in [0, 1].
Descriptor extract_descriptor(const Image& rgb);

/// 1/2 (1 + cos) + exp(-|a - b|) on the concatenated vectors; 0 when both
/// are zero.
double descriptor_similarity(const Descriptor& a, const Descriptor& b);

namespace detail {

/// Power spectrum radial histogram of a luminance image (before
/// normalisation). Radius is measured in cycles per sample, bins span
/// [0, 0.5] and the corner frequencies fold into the last bin.
Eigen::VectorXd radial_power_bins(const Image& lum);

/// The 16 zero-mean 5x5 texture kernels, row-major.
const std::vector<Eigen::Matrix<double, 5, 5>>& texture_kernels();

}  // namespace detail

}  // namespace mipslam
