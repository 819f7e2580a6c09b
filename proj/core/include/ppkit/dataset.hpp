#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppkit/tensor.hpp"
#include "ppkit/yuv.hpp"

namespace ppkit {

inline constexpr std::uint16_t kDatasetFormatVersion = 1;

struct DatasetMeta {
  std::string codec = "VVC";
  std::string qp_group = "QP32";
};

// Where each pair came from: crop origin in the source frame plus the quarter
// turns applied, enough to re-derive the stored original block.
struct BlockRecord {
  std::int32_t sequence = 0;
  std::int32_t frame = 0;
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t rotation = 0;  // counter-clockwise quarter turns, 0..3
};

struct SequenceSpec {
  std::string compressed_path;
  std::string original_path;
  std::int64_t width = 0;
  std::int64_t height = 0;
  int bit_depth = 8;
};

// Rotates the spatial dims of every (n, c) plane by k counter-clockwise
// quarter turns; spatial dims must be square.
Tensor4f rotate_quarter(const Tensor4f& block, int k);

// Packed co-located block pairs. Samples are stored quantized (8 or 16 bit per
// channel, matching the deepest source) so the file is compact and the re-crop
// oracle is exact; accessors rescale to [0,1] floats.
class BlockPairDataset {
public:
  // Random co-located crops (even-aligned so a crop is a whole 4:2:0 unit),
  // blocks_per_frame from every frame of every pair, co-rotated.
  static BlockPairDataset build(const std::vector<SequenceSpec>& pairs,
                                std::int64_t blocks_per_frame, std::uint64_t seed,
                                DatasetMeta meta, std::int64_t block_size = 96);

  static BlockPairDataset load(const std::string& path);
  void save(const std::string& path) const;

  std::int64_t size() const { return static_cast<std::int64_t>(records_.size()); }
  std::int64_t block_size() const { return block_size_; }
  int sample_depth() const { return sample_depth_; }
  const DatasetMeta& meta() const { return meta_; }
  const std::vector<BlockRecord>& records() const { return records_; }

  // (1,3,B,B) float blocks in [0,1].
  Tensor4f compressed_block(std::int64_t i) const;
  Tensor4f original_block(std::int64_t i) const;

  // (n,3,B,B) batches mapped to [-1,1] for training.
  void fetch(const std::vector<std::int64_t>& indices, Tensor4f* compressed,
             Tensor4f* original) const;

  // Raw quantized samples (3*B*B per block, RGB planes), for oracle checks.
  const std::uint16_t* raw_compressed(std::int64_t i) const;
  const std::uint16_t* raw_original(std::int64_t i) const;

  // Quantization used by build/save; exposed so oracles can mirror it.
  static std::uint16_t quantize_sample(float v, int sample_depth);

private:
  DatasetMeta meta_;
  std::int64_t block_size_ = 96;
  int sample_depth_ = 8;  // bits per stored sample: 8 or 16
  std::vector<std::uint16_t> comp_;  // size()*3*B*B
  std::vector<std::uint16_t> orig_;
  std::vector<BlockRecord> records_;

  Tensor4f block_at(const std::vector<std::uint16_t>& store, std::int64_t i) const;
};

}  // namespace ppkit
