#pragma once

#include <cstdint>
#include <functional>

#include "ppkit/model_io.hpp"
#include "ppkit/tiling.hpp"
#include "ppkit/yuv.hpp"

namespace ppkit {

// Maps a batch of [-1,1] RGB blocks to enhanced blocks of identical shape.
// Test doubles (e.g. pass-through) plug in here.
using BlockTransform = std::function<Tensor4f(const Tensor4f&)>;

RgbImage enhance_image(const RgbImage& img, const BlockTransform& transform,
                       std::int64_t block_size = 96, std::int64_t overlap = 4,
                       std::int64_t blocks_per_batch = 8);

PlanarFrame420 enhance_frame_with(const BlockTransform& transform, const PlanarFrame420& frame,
                                  std::int64_t block_size = 96, std::int64_t overlap = 4,
                                  std::int64_t blocks_per_batch = 8);

// Full path: convert, tile, run the bundle's generator, stitch, convert back
// at the input bit depth.
PlanarFrame420 enhance_frame(const ModelBundle& bundle, const PlanarFrame420& frame);

}  // namespace ppkit
