#include "ppkit/yuv.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace ppkit {
namespace {

std::int64_t file_size_checked(const std::string& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat " + path + ": " + ec.message());
  return static_cast<std::int64_t>(size);
}

void read_plane(std::ifstream& in, const std::string& path, int bit_depth,
                std::vector<std::uint16_t>& plane) {
  const std::uint16_t max = static_cast<std::uint16_t>((1u << bit_depth) - 1);
  if (bit_depth == 8) {
    std::vector<unsigned char> raw(plane.size());
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
      throw IoError("read failure on " + path);
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = raw[i];
  } else {
    std::vector<unsigned char> raw(plane.size() * 2);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
      throw IoError("read failure on " + path);
    for (std::size_t i = 0; i < plane.size(); ++i) {
      const std::uint16_t v =
          static_cast<std::uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
      if (v > max)
        throw FormatError("out-of-range sample in " + path + ": value " + std::to_string(v) +
                          " exceeds " + std::to_string(max) + " for " +
                          std::to_string(bit_depth) + "-bit content");
      plane[i] = v;
    }
  }
}

void write_plane(std::ofstream& out, int bit_depth, const std::vector<std::uint16_t>& plane) {
  if (bit_depth == 8) {
    std::vector<unsigned char> raw(plane.size());
    for (std::size_t i = 0; i < plane.size(); ++i)
      raw[i] = static_cast<unsigned char>(plane[i]);
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
  } else {
    std::vector<unsigned char> raw(plane.size() * 2);
    for (std::size_t i = 0; i < plane.size(); ++i) {
      raw[2 * i] = static_cast<unsigned char>(plane[i] & 0xff);
      raw[2 * i + 1] = static_cast<unsigned char>(plane[i] >> 8);
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
  }
}

}  // namespace

void validate_frame_geometry(std::int64_t width, std::int64_t height, int bit_depth) {
  if (width <= 0 || height <= 0)
    throw ValidationError("frame dimensions must be positive, got " + std::to_string(width) +
                          "x" + std::to_string(height));
  if (width % 2 != 0 || height % 2 != 0)
    throw ValidationError("frame dimensions must be even for 4:2:0, got " +
                          std::to_string(width) + "x" + std::to_string(height));
  if (bit_depth != 8 && bit_depth != 10)
    throw ValidationError("bit depth must be 8 or 10, got " + std::to_string(bit_depth));
}

void validate_frame(const PlanarFrame420& f) {
  validate_frame_geometry(f.width, f.height, f.bit_depth);
  const std::size_t luma = static_cast<std::size_t>(f.width * f.height);
  const std::size_t chroma = static_cast<std::size_t>((f.width / 2) * (f.height / 2));
  if (f.y.size() != luma || f.cb.size() != chroma || f.cr.size() != chroma)
    throw ValidationError("frame plane sizes do not match geometry");
  const std::uint16_t max = static_cast<std::uint16_t>((1u << f.bit_depth) - 1);
  for (std::uint16_t v : f.y)
    if (v > max) throw ValidationError("luma sample " + std::to_string(v) + " out of range");
  for (std::uint16_t v : f.cb)
    if (v > max) throw ValidationError("cb sample " + std::to_string(v) + " out of range");
  for (std::uint16_t v : f.cr)
    if (v > max) throw ValidationError("cr sample " + std::to_string(v) + " out of range");
}

PlanarFrame420 make_frame(std::int64_t width, std::int64_t height, int bit_depth) {
  validate_frame_geometry(width, height, bit_depth);
  PlanarFrame420 f;
  f.width = width;
  f.height = height;
  f.bit_depth = bit_depth;
  f.y.assign(static_cast<std::size_t>(width * height), 0);
  f.cb.assign(static_cast<std::size_t>((width / 2) * (height / 2)), 0);
  f.cr.assign(static_cast<std::size_t>((width / 2) * (height / 2)), 0);
  return f;
}

std::int64_t frame_byte_size(std::int64_t width, std::int64_t height, int bit_depth) {
  validate_frame_geometry(width, height, bit_depth);
  const std::int64_t samples = width * height * 3 / 2;
  return bit_depth == 8 ? samples : samples * 2;
}

std::int64_t count_yuv_frames(const std::string& path, std::int64_t width,
                              std::int64_t height, int bit_depth) {
  const std::int64_t fs = frame_byte_size(width, height, bit_depth);
  const std::int64_t bytes = file_size_checked(path);
  if (bytes % fs != 0)
    throw FormatError(path + ": size " + std::to_string(bytes) +
                      " is not a whole number of " + std::to_string(fs) + "-byte frames");
  return bytes / fs;
}

PlanarFrame420 read_yuv(const std::string& path, std::int64_t width, std::int64_t height,
                        int bit_depth, std::int64_t frame_index) {
  if (frame_index < 0) throw ValidationError("frame index must be non-negative");
  const std::int64_t fs = frame_byte_size(width, height, bit_depth);
  const std::int64_t bytes = file_size_checked(path);
  if (bytes < fs * (frame_index + 1))
    throw FormatError(path + ": need " + std::to_string(fs * (frame_index + 1)) +
                      " bytes for frame " + std::to_string(frame_index) + ", file has " +
                      std::to_string(bytes));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  in.seekg(static_cast<std::streamoff>(fs * frame_index));
  PlanarFrame420 f = make_frame(width, height, bit_depth);
  read_plane(in, path, bit_depth, f.y);
  read_plane(in, path, bit_depth, f.cb);
  read_plane(in, path, bit_depth, f.cr);
  return f;
}

void write_yuv(const std::string& path, const PlanarFrame420& f, bool append) {
  validate_frame(f);
  std::ofstream out(path, append ? std::ios::binary | std::ios::app : std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_plane(out, f.bit_depth, f.y);
  write_plane(out, f.bit_depth, f.cb);
  write_plane(out, f.bit_depth, f.cr);
  out.flush();
  if (!out) throw IoError("write failure on " + path);
}

}  // namespace ppkit
