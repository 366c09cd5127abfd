#include "mipslam/image.hpp"

namespace mipslam {

Image luminance(const Image& rgb) {
  require(rgb.channels == 3, "luminance: expected a 3-channel image");
  Image out(rgb.width, rgb.height, 1);
  for (std::size_t p = 0; p < rgb.pixel_count(); ++p) {
    const double* px = &rgb.data[3 * p];
    out.data[p] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }
  return out;
}

Image box_downsample(const Image& img, int factor) {
  require(factor >= 1, "box_downsample: factor must be >= 1");
  require(img.width % factor == 0 && img.height % factor == 0,
          "box_downsample: dimensions must be divisible by the factor");
  Image out(img.width / factor, img.height / factor, img.channels);
  const double inv = 1.0 / (static_cast<double>(factor) * factor);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        double s = 0.0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx) s += img.at(x * factor + dx, y * factor + dy, c);
        out.at(x, y, c) = s * inv;
      }
    }
  }
  return out;
}

}  // namespace mipslam
