#include "ppkit/dataset.hpp"

#include <cmath>
#include <utility>

#include "ppkit/bytes.hpp"
#include "ppkit/color.hpp"
#include "ppkit/random.hpp"

namespace ppkit {
namespace {

constexpr char kMagic[4] = {'P', 'P', 'K', 'D'};

// (y, x) source for one CCW quarter turn: out(y, x) = in(x, B-1-y).
void rotate_once(const float* in, float* out, std::int64_t b) {
  for (std::int64_t y = 0; y < b; ++y)
    for (std::int64_t x = 0; x < b; ++x) out[y * b + x] = in[x * b + (b - 1 - y)];
}

}  // namespace

Tensor4f rotate_quarter(const Tensor4f& block, int k) {
  const auto& d = block.dims();
  if (d.h != d.w) throw ValidationError("rotate_quarter: block must be square");
  k = ((k % 4) + 4) % 4;
  Tensor4f cur = block;
  for (int turn = 0; turn < k; ++turn) {
    Tensor4f next(d);
    for (std::int64_t n = 0; n < d.n; ++n)
      for (std::int64_t c = 0; c < d.c; ++c) {
        const float* src = cur.data() + (n * d.c + c) * d.h * d.w;
        rotate_once(src, next.data() + (n * d.c + c) * d.h * d.w, d.h);
      }
    cur = std::move(next);
  }
  return cur;
}

std::uint16_t BlockPairDataset::quantize_sample(float v, int sample_depth) {
  const float max = sample_depth == 8 ? 255.0f : 65535.0f;
  const float clamped = std::min(1.0f, std::max(0.0f, v));
  return static_cast<std::uint16_t>(std::lround(clamped * max));
}

BlockPairDataset BlockPairDataset::build(const std::vector<SequenceSpec>& pairs,
                                         std::int64_t blocks_per_frame, std::uint64_t seed,
                                         DatasetMeta meta, std::int64_t block_size) {
  if (pairs.empty()) throw ValidationError("dataset build: no sequence pairs");
  if (blocks_per_frame < 1) throw ValidationError("dataset build: blocks_per_frame must be >= 1");
  if (block_size < 2 || block_size % 2 != 0)
    throw ValidationError("dataset build: block size must be even and >= 2");

  BlockPairDataset ds;
  ds.meta_ = std::move(meta);
  ds.block_size_ = block_size;
  ds.sample_depth_ = 8;
  for (const auto& p : pairs)
    if (p.bit_depth == 10) ds.sample_depth_ = 16;

  Rng rng(seed);
  const std::int64_t plane = block_size * block_size;
  for (std::size_t si = 0; si < pairs.size(); ++si) {
    const SequenceSpec& sp = pairs[si];
    validate_frame_geometry(sp.width, sp.height, sp.bit_depth);
    if (sp.width < block_size || sp.height < block_size)
      throw ValidationError("dataset build: sequence " + sp.compressed_path + " is " +
                            std::to_string(sp.width) + "x" + std::to_string(sp.height) +
                            ", smaller than block size " + std::to_string(block_size));
    const std::int64_t frames_c =
        count_yuv_frames(sp.compressed_path, sp.width, sp.height, sp.bit_depth);
    const std::int64_t frames_o =
        count_yuv_frames(sp.original_path, sp.width, sp.height, sp.bit_depth);
    if (frames_c != frames_o)
      throw ValidationError("dataset build: frame count mismatch for pair " +
                            sp.compressed_path + " (" + std::to_string(frames_c) + ") vs " +
                            sp.original_path + " (" + std::to_string(frames_o) + ")");
    for (std::int64_t f = 0; f < frames_c; ++f) {
      const RgbImage comp =
          ycbcr_to_rgb(read_yuv(sp.compressed_path, sp.width, sp.height, sp.bit_depth, f));
      const RgbImage orig =
          ycbcr_to_rgb(read_yuv(sp.original_path, sp.width, sp.height, sp.bit_depth, f));
      for (std::int64_t bi = 0; bi < blocks_per_frame; ++bi) {
        // Even-aligned crops so every crop is a self-contained 4:2:0 unit.
        const std::int64_t max_x = (sp.width - block_size) / 2;
        const std::int64_t max_y = (sp.height - block_size) / 2;
        BlockRecord rec;
        rec.sequence = static_cast<std::int32_t>(si);
        rec.frame = static_cast<std::int32_t>(f);
        rec.x = static_cast<std::int32_t>(2 * rng.below(static_cast<std::uint64_t>(max_x + 1)));
        rec.y = static_cast<std::int32_t>(2 * rng.below(static_cast<std::uint64_t>(max_y + 1)));
        rec.rotation = static_cast<std::int32_t>(rng.below(4));

        for (const auto& [img, store] :
             {std::pair<const RgbImage*, std::vector<std::uint16_t>*>{&comp, &ds.comp_},
              {&orig, &ds.orig_}}) {
          Tensor4f crop({1, 3, block_size, block_size});
          for (int c = 0; c < 3; ++c)
            for (std::int64_t y = 0; y < block_size; ++y)
              for (std::int64_t x = 0; x < block_size; ++x)
                crop.at(0, c, y, x) = img->plane_at(c, rec.y + y, rec.x + x);
          const Tensor4f rotated = rotate_quarter(crop, rec.rotation);
          for (std::int64_t i = 0; i < 3 * plane; ++i)
            store->push_back(quantize_sample(rotated[i], ds.sample_depth_));
        }
        ds.records_.push_back(rec);
      }
    }
  }
  return ds;
}

Tensor4f BlockPairDataset::block_at(const std::vector<std::uint16_t>& store,
                                    std::int64_t i) const {
  if (i < 0 || i >= size())
    throw ValidationError("dataset: index " + std::to_string(i) + " out of range (size " +
                          std::to_string(size()) + ")");
  const float max = sample_depth_ == 8 ? 255.0f : 65535.0f;
  const std::int64_t stride = 3 * block_size_ * block_size_;
  Tensor4f out({1, 3, block_size_, block_size_});
  const std::uint16_t* src = store.data() + i * stride;
  for (std::int64_t j = 0; j < stride; ++j) out[j] = static_cast<float>(src[j]) / max;
  return out;
}

Tensor4f BlockPairDataset::compressed_block(std::int64_t i) const {
  return block_at(comp_, i);
}
Tensor4f BlockPairDataset::original_block(std::int64_t i) const { return block_at(orig_, i); }

void BlockPairDataset::fetch(const std::vector<std::int64_t>& indices, Tensor4f* compressed,
                             Tensor4f* original) const {
  if (indices.empty()) throw ValidationError("dataset fetch: empty index list");
  const float max = sample_depth_ == 8 ? 255.0f : 65535.0f;
  const std::int64_t stride = 3 * block_size_ * block_size_;
  const auto n = static_cast<std::int64_t>(indices.size());
  for (const auto& [store, out] :
       {std::pair<const std::vector<std::uint16_t>*, Tensor4f*>{&comp_, compressed},
        {&orig_, original}}) {
    if (!out) continue;
    *out = Tensor4f({n, 3, block_size_, block_size_});
    for (std::int64_t b = 0; b < n; ++b) {
      const std::int64_t i = indices[static_cast<std::size_t>(b)];
      if (i < 0 || i >= size())
        throw ValidationError("dataset fetch: index " + std::to_string(i) + " out of range");
      const std::uint16_t* src = store->data() + i * stride;
      float* dst = out->data() + b * stride;
      for (std::int64_t j = 0; j < stride; ++j)
        dst[j] = 2.0f * (static_cast<float>(src[j]) / max) - 1.0f;
    }
  }
}

const std::uint16_t* BlockPairDataset::raw_compressed(std::int64_t i) const {
  return comp_.data() + i * 3 * block_size_ * block_size_;
}
const std::uint16_t* BlockPairDataset::raw_original(std::int64_t i) const {
  return orig_.data() + i * 3 * block_size_ * block_size_;
}

void BlockPairDataset::save(const std::string& path) const {
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u16(kDatasetFormatVersion);
  w.str(meta_.codec);
  w.str(meta_.qp_group);
  w.u32(static_cast<std::uint32_t>(block_size_));
  w.u8(static_cast<std::uint8_t>(sample_depth_));
  w.u32(static_cast<std::uint32_t>(size()));
  auto write_store = [&](const std::vector<std::uint16_t>& store) {
    if (sample_depth_ == 8) {
      for (std::uint16_t v : store) w.u8(static_cast<std::uint8_t>(v));
    } else {
      for (std::uint16_t v : store) w.u16(v);
    }
  };
  write_store(comp_);
  write_store(orig_);
  for (const BlockRecord& r : records_) {
    w.u32(static_cast<std::uint32_t>(r.sequence));
    w.u32(static_cast<std::uint32_t>(r.frame));
    w.u32(static_cast<std::uint32_t>(r.x));
    w.u32(static_cast<std::uint32_t>(r.y));
    w.u8(static_cast<std::uint8_t>(r.rotation));
  }
  w.u64(w.checksum());
  w.write_file(path);
}

BlockPairDataset BlockPairDataset::load(const std::string& path) {
  ByteReader r = ByteReader::from_file(path);
  if (r.size() < 4 || std::memcmp(r.take(4), kMagic, 4) != 0)
    throw FormatError(path + ": not a dataset file (bad magic)");
  if (r.size() < 4 + 2 + 8) throw FormatError("truncated file: " + path);
  {
    ByteReader whole = ByteReader::from_file(path);
    const std::size_t body = whole.size() - 8;
    const std::uint64_t computed = fnv1a64(whole.take(body), body);
    if (computed != whole.u64())
      throw FormatError(path + ": checksum mismatch (file corrupted)");
  }
  const std::uint16_t version = r.u16();
  if (version != kDatasetFormatVersion)
    throw FormatError(path + ": unsupported dataset format version " +
                      std::to_string(version));
  BlockPairDataset ds;
  ds.meta_.codec = r.str();
  ds.meta_.qp_group = r.str();
  ds.block_size_ = r.u32();
  ds.sample_depth_ = r.u8();
  if (ds.sample_depth_ != 8 && ds.sample_depth_ != 16)
    throw FormatError(path + ": bad sample depth " + std::to_string(ds.sample_depth_));
  if (ds.block_size_ < 2)
    throw FormatError(path + ": bad block size " + std::to_string(ds.block_size_));
  const std::uint32_t count = r.u32();
  const std::int64_t stride = 3 * ds.block_size_ * ds.block_size_;
  auto read_store = [&](std::vector<std::uint16_t>& store) {
    store.resize(static_cast<std::size_t>(stride * count));
    if (ds.sample_depth_ == 8) {
      for (auto& v : store) v = r.u8();
    } else {
      for (auto& v : store) v = r.u16();
    }
  };
  read_store(ds.comp_);
  read_store(ds.orig_);
  ds.records_.resize(count);
  for (auto& rec : ds.records_) {
    rec.sequence = static_cast<std::int32_t>(r.u32());
    rec.frame = static_cast<std::int32_t>(r.u32());
    rec.x = static_cast<std::int32_t>(r.u32());
    rec.y = static_cast<std::int32_t>(r.u32());
    rec.rotation = r.u8();
  }
  if (r.remaining() != 8)
    throw FormatError(path + ": unexpected trailing data");
  return ds;
}

}  // namespace ppkit
