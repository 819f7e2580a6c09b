#include "ppkit/tiling.hpp"

#include <algorithm>

namespace ppkit {
namespace {

std::vector<std::int64_t> axis_positions(std::int64_t dim, std::int64_t block,
                                         std::int64_t stride) {
  std::vector<std::int64_t> pos;
  for (std::int64_t p = 0; p + block <= dim; p += stride) pos.push_back(p);
  if (pos.back() != dim - block) pos.push_back(dim - block);
  return pos;
}

}  // namespace

BlockGrid plan_blocks(std::int64_t width, std::int64_t height, std::int64_t block_size,
                      std::int64_t overlap) {
  if (block_size < 1 || overlap < 0 || overlap >= block_size)
    throw ValidationError("plan_blocks: need 0 <= overlap < block_size");
  if (width < block_size || height < block_size)
    throw ValidationError("plan_blocks: frame " + std::to_string(width) + "x" +
                          std::to_string(height) + " smaller than block size " +
                          std::to_string(block_size));
  BlockGrid grid;
  grid.width = width;
  grid.height = height;
  grid.block_size = block_size;
  grid.overlap = overlap;
  grid.xs = axis_positions(width, block_size, block_size - overlap);
  grid.ys = axis_positions(height, block_size, block_size - overlap);
  return grid;
}

Tensor4f extract_blocks(const RgbImage& img, const BlockGrid& grid) {
  if (img.width != grid.width || img.height != grid.height)
    throw ValidationError("extract_blocks: grid is for " + std::to_string(grid.width) + "x" +
                          std::to_string(grid.height) + ", image is " +
                          std::to_string(img.width) + "x" + std::to_string(img.height));
  const std::int64_t b = grid.block_size;
  Tensor4f out({grid.block_count(), 3, b, b});
  std::int64_t n = 0;
  for (std::int64_t by : grid.ys)
    for (std::int64_t bx : grid.xs) {
      for (int c = 0; c < 3; ++c)
        for (std::int64_t y = 0; y < b; ++y)
          for (std::int64_t x = 0; x < b; ++x)
            out.at(n, c, y, x) = 2.0f * img.plane_at(c, by + y, bx + x) - 1.0f;
      ++n;
    }
  return out;
}

RgbImage aggregate_blocks(const Tensor4f& blocks, const BlockGrid& grid) {
  if (blocks.dims() != Dims4{grid.block_count(), 3, grid.block_size, grid.block_size})
    throw ValidationError("aggregate_blocks: got " + blocks.dims().to_string() +
                          ", grid expects (" + std::to_string(grid.block_count()) + ",3," +
                          std::to_string(grid.block_size) + "," +
                          std::to_string(grid.block_size) + ")");
  const std::int64_t b = grid.block_size;
  const std::size_t pixels = static_cast<std::size_t>(grid.width * grid.height);
  std::vector<double> acc(pixels * 3, 0.0);
  std::vector<std::int32_t> count(pixels, 0);
  std::int64_t n = 0;
  for (std::int64_t by : grid.ys)
    for (std::int64_t bx : grid.xs) {
      for (std::int64_t y = 0; y < b; ++y)
        for (std::int64_t x = 0; x < b; ++x) {
          const std::size_t pi = static_cast<std::size_t>((by + y) * grid.width + (bx + x));
          for (int c = 0; c < 3; ++c)
            acc[pi * 3 + c] += (static_cast<double>(blocks.at(n, c, y, x)) + 1.0) / 2.0;
          ++count[pi];
        }
      ++n;
    }
  RgbImage img = make_rgb_image(grid.width, grid.height);
  for (std::size_t pi = 0; pi < pixels; ++pi) {
    for (int c = 0; c < 3; ++c) {
      const double v = acc[pi * 3 + c] / static_cast<double>(count[pi]);
      const float clamped = static_cast<float>(std::min(1.0, std::max(0.0, v)));
      (c == 0 ? img.r : c == 1 ? img.g : img.b)[pi] = clamped;
    }
  }
  return img;
}

std::vector<std::int32_t> coverage_counts(const BlockGrid& grid) {
  std::vector<std::int32_t> count(static_cast<std::size_t>(grid.width * grid.height), 0);
  for (std::int64_t by : grid.ys)
    for (std::int64_t bx : grid.xs)
      for (std::int64_t y = 0; y < grid.block_size; ++y)
        for (std::int64_t x = 0; x < grid.block_size; ++x)
          ++count[static_cast<std::size_t>((by + y) * grid.width + (bx + x))];
  return count;
}

}  // namespace ppkit
