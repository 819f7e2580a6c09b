#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppkit/errors.hpp"

namespace ppkit {

// 4:2:0 planar frame. Samples are kept in uint16 regardless of depth; the
// invariant sample < 2^bit_depth is checked on ingest and before write.
struct PlanarFrame420 {
  std::int64_t width = 0;
  std::int64_t height = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> y;   // width*height
  std::vector<std::uint16_t> cb;  // (width/2)*(height/2)
  std::vector<std::uint16_t> cr;
};

void validate_frame_geometry(std::int64_t width, std::int64_t height, int bit_depth);
void validate_frame(const PlanarFrame420& f);

PlanarFrame420 make_frame(std::int64_t width, std::int64_t height, int bit_depth);

// Bytes one frame occupies on disk (10-bit samples take 2 bytes each).
std::int64_t frame_byte_size(std::int64_t width, std::int64_t height, int bit_depth);

// Number of whole frames in the file; trailing partial data is an error.
std::int64_t count_yuv_frames(const std::string& path, std::int64_t width,
                              std::int64_t height, int bit_depth);

PlanarFrame420 read_yuv(const std::string& path, std::int64_t width, std::int64_t height,
                        int bit_depth, std::int64_t frame_index);

// Appends one frame; pass append=false for the first frame to truncate.
void write_yuv(const std::string& path, const PlanarFrame420& f, bool append);

}  // namespace ppkit
