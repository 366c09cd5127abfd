#pragma once

#include <vector>

#include "mipslam/rasterizer.hpp"

namespace mipslam::detail {

struct TileBins {
  int tile_size = 16;
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<std::vector<int>> lists;  // prepared indices, front to back
};

TileBins bin_tiles(const std::vector<PreparedGaussian>& prepared, int width, int height, int tile_size);

/// d a_i / d(opacity, mean2d, cov2d) at pixel (x, y).
AlphaGradient pixel_alpha_gradient(const PreparedGaussian& g, int x, int y, int width,
                                   const RenderConfig& cfg);

struct Contribution {
  int slot = 0;  // position in the tile list
  double alpha = 0.0;
  double transmittance = 0.0;  // before this contribution
};

/// Front-to-back walk over one tile list at pixel (x, y). Fills `out` and
/// returns the transmittance left after the last contribution.
double composite_pixel(const std::vector<PreparedGaussian>& prepared, const std::vector<int>& list,
                       int x, int y, int width, const RenderConfig& cfg,
                       std::vector<Contribution>& out);

}  // namespace mipslam::detail
