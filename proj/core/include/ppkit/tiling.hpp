#pragma once

#include <cstdint>
#include <vector>

#include "ppkit/color.hpp"
#include "ppkit/tensor.hpp"

namespace ppkit {

// Overlapping block layout. Positions step by block_size - overlap along each
// axis; the last position is clamped to dim - block_size so coverage is exact.
struct BlockGrid {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::int64_t block_size = 96;
  std::int64_t overlap = 4;
  std::vector<std::int64_t> xs;  // column positions, ascending
  std::vector<std::int64_t> ys;  // row positions, ascending

  std::int64_t block_count() const {
    return static_cast<std::int64_t>(xs.size() * ys.size());
  }
};

BlockGrid plan_blocks(std::int64_t width, std::int64_t height, std::int64_t block_size = 96,
                      std::int64_t overlap = 4);

// Blocks in grid order (rows outer, columns inner), channels RGB, values
// mapped from [0,1] pixels to [-1,1].
Tensor4f extract_blocks(const RgbImage& img, const BlockGrid& grid);

// Per-pixel arithmetic mean of all covering block contributions, mapped back
// to [0,1] and clamped. Accumulation runs in double.
RgbImage aggregate_blocks(const Tensor4f& blocks, const BlockGrid& grid);

// How many blocks cover each pixel (row-major), for coverage checks.
std::vector<std::int32_t> coverage_counts(const BlockGrid& grid);

}  // namespace ppkit
