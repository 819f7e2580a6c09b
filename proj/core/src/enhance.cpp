#include "ppkit/enhance.hpp"

#include <algorithm>

namespace ppkit {

RgbImage enhance_image(const RgbImage& img, const BlockTransform& transform,
                       std::int64_t block_size, std::int64_t overlap,
                       std::int64_t blocks_per_batch) {
  if (blocks_per_batch < 1) throw ValidationError("enhance: blocks_per_batch must be >= 1");
  const BlockGrid grid = plan_blocks(img.width, img.height, block_size, overlap);
  const Tensor4f blocks = extract_blocks(img, grid);
  Tensor4f out(blocks.dims());
  const std::int64_t total = blocks.dims().n;
  const std::int64_t item = 3 * block_size * block_size;
  for (std::int64_t start = 0; start < total; start += blocks_per_batch) {
    const std::int64_t n = std::min(blocks_per_batch, total - start);
    Tensor4f chunk({n, 3, block_size, block_size});
    std::copy_n(blocks.data() + start * item, n * item, chunk.data());
    Tensor4f enhanced = transform(chunk);
    if (enhanced.dims() != chunk.dims())
      throw ValidationError("enhance: transform changed block shape from " +
                            chunk.dims().to_string() + " to " + enhanced.dims().to_string());
    std::copy_n(enhanced.data(), n * item, out.data() + start * item);
  }
  return aggregate_blocks(out, grid);
}

PlanarFrame420 enhance_frame_with(const BlockTransform& transform, const PlanarFrame420& frame,
                                  std::int64_t block_size, std::int64_t overlap,
                                  std::int64_t blocks_per_batch) {
  const RgbImage rgb = ycbcr_to_rgb(frame);
  const RgbImage enhanced =
      enhance_image(rgb, transform, block_size, overlap, blocks_per_batch);
  return rgb_to_ycbcr(enhanced, frame.bit_depth);
}

PlanarFrame420 enhance_frame(const ModelBundle& bundle, const PlanarFrame420& frame) {
  validate_bundle(bundle);
  const GeneratorConfig& cfg = bundle.gen_config;
  const ParameterSetF& params = bundle.gen_params;
  return enhance_frame_with(
      [&](const Tensor4f& blocks) { return generator_forward(cfg, params, blocks); }, frame,
      cfg.input_block_size, 4);
}

}  // namespace ppkit
