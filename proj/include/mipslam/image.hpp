#pragma once

#include <cstddef>
#include <vector>

#include "mipslam/common.hpp"

namespace mipslam {

/// Row-major interleaved image of doubles.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c), fill) {
    require(w >= 0 && h >= 0 && c >= 1, "Image: bad dimensions");
  }

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels) +
           static_cast<std::size_t>(c);
  }
  double& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

/// 0.299 R + 0.587 G + 0.114 B.
Image luminance(const Image& rgb);

/// Averages non-overlapping factor x factor blocks; dimensions must divide.
Image box_downsample(const Image& img, int factor);

}  // namespace mipslam
