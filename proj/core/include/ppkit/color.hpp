#pragma once

#include <cstdint>
#include <vector>

#include "ppkit/yuv.hpp"

namespace ppkit {

// Planar RGB in [0,1]; values are clamped on construction paths.
struct RgbImage {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<float> r, g, b;

  float& plane_at(int c, std::int64_t y, std::int64_t x) {
    auto& p = c == 0 ? r : (c == 1 ? g : b);
    return p[static_cast<std::size_t>(y * width + x)];
  }
  float plane_at(int c, std::int64_t y, std::int64_t x) const {
    const auto& p = c == 0 ? r : (c == 1 ? g : b);
    return p[static_cast<std::size_t>(y * width + x)];
  }
};

RgbImage make_rgb_image(std::int64_t width, std::int64_t height);
void validate_rgb_image(const RgbImage& img);

// BT.709 limited range. Chroma is upsampled by nearest-neighbour replication
// before matrixing; the reverse path downsamples chroma with a 2x2 mean.
RgbImage ycbcr_to_rgb(const PlanarFrame420& frame);
PlanarFrame420 rgb_to_ycbcr(const RgbImage& img, int bit_depth);

}  // namespace ppkit
