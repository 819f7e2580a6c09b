#include "ppkit/color.hpp"

#include <algorithm>
#include <cmath>

namespace ppkit {
namespace {

constexpr double kKr = 0.2126;  // BT.709
constexpr double kKb = 0.0722;
constexpr double kKg = 1.0 - kKr - kKb;

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

std::uint16_t quantize(double v, double range, double offset, double scale,
                       std::uint16_t max_code) {
  const double code = scale * (range * v + offset);
  const long long q = std::llround(code);
  return static_cast<std::uint16_t>(std::min<long long>(max_code, std::max<long long>(0, q)));
}

}  // namespace

RgbImage make_rgb_image(std::int64_t width, std::int64_t height) {
  if (width <= 0 || height <= 0)
    throw ValidationError("rgb image dimensions must be positive");
  RgbImage img;
  img.width = width;
  img.height = height;
  const std::size_t n = static_cast<std::size_t>(width * height);
  img.r.assign(n, 0.0f);
  img.g.assign(n, 0.0f);
  img.b.assign(n, 0.0f);
  return img;
}

void validate_rgb_image(const RgbImage& img) {
  if (img.width <= 0 || img.height <= 0)
    throw ValidationError("rgb image dimensions must be positive");
  const std::size_t n = static_cast<std::size_t>(img.width * img.height);
  if (img.r.size() != n || img.g.size() != n || img.b.size() != n)
    throw ValidationError("rgb image plane sizes do not match geometry");
  for (const auto* p : {&img.r, &img.g, &img.b})
    for (float v : *p)
      if (!(v >= 0.0f && v <= 1.0f))
        throw ValidationError("rgb image value " + std::to_string(v) + " outside [0,1]");
}

RgbImage ycbcr_to_rgb(const PlanarFrame420& frame) {
  validate_frame(frame);
  const double scale = frame.bit_depth == 8 ? 1.0 : 4.0;  // 2^(d-8)
  RgbImage img = make_rgb_image(frame.width, frame.height);
  const std::int64_t cw = frame.width / 2;
  for (std::int64_t y = 0; y < frame.height; ++y) {
    for (std::int64_t x = 0; x < frame.width; ++x) {
      const double yc = frame.y[static_cast<std::size_t>(y * frame.width + x)];
      const std::size_t ci = static_cast<std::size_t>((y / 2) * cw + (x / 2));
      const double cbc = frame.cb[ci];
      const double crc = frame.cr[ci];
      const double yp = (yc / scale - 16.0) / 219.0;
      const double pb = (cbc / scale - 128.0) / 224.0;
      const double pr = (crc / scale - 128.0) / 224.0;
      const double r = yp + 2.0 * (1.0 - kKr) * pr;
      const double b = yp + 2.0 * (1.0 - kKb) * pb;
      const double g = (yp - kKr * r - kKb * b) / kKg;
      const std::size_t i = static_cast<std::size_t>(y * frame.width + x);
      img.r[i] = static_cast<float>(clamp01(r));
      img.g[i] = static_cast<float>(clamp01(g));
      img.b[i] = static_cast<float>(clamp01(b));
    }
  }
  return img;
}

PlanarFrame420 rgb_to_ycbcr(const RgbImage& img, int bit_depth) {
  validate_rgb_image(img);
  validate_frame_geometry(img.width, img.height, bit_depth);
  const double scale = bit_depth == 8 ? 1.0 : 4.0;
  const std::uint16_t max_code = static_cast<std::uint16_t>((1u << bit_depth) - 1);
  PlanarFrame420 f = make_frame(img.width, img.height, bit_depth);

  // Full-resolution Pb/Pr retained so the 2x2 chroma mean happens before
  // quantization.
  std::vector<double> pb(static_cast<std::size_t>(img.width * img.height));
  std::vector<double> pr(pb.size());
  for (std::int64_t y = 0; y < img.height; ++y) {
    for (std::int64_t x = 0; x < img.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y * img.width + x);
      const double r = img.r[i], g = img.g[i], b = img.b[i];
      const double yp = kKr * r + kKg * g + kKb * b;
      pb[i] = (b - yp) / (2.0 * (1.0 - kKb));
      pr[i] = (r - yp) / (2.0 * (1.0 - kKr));
      f.y[i] = quantize(yp, 219.0, 16.0, scale, max_code);
    }
  }
  const std::int64_t cw = img.width / 2, ch = img.height / 2;
  for (std::int64_t y = 0; y < ch; ++y) {
    for (std::int64_t x = 0; x < cw; ++x) {
      double sb = 0, sr = 0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const std::size_t i =
              static_cast<std::size_t>((2 * y + dy) * img.width + (2 * x + dx));
          sb += pb[i];
          sr += pr[i];
        }
      const std::size_t ci = static_cast<std::size_t>(y * cw + x);
      f.cb[ci] = quantize(sb / 4.0, 224.0, 128.0, scale, max_code);
      f.cr[ci] = quantize(sr / 4.0, 224.0, 128.0, scale, max_code);
    }
  }
  return f;
}

}  // namespace ppkit
