#include "ppkit/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "ppkit/tensor.hpp"

namespace ppkit {
namespace {

void check_same_geometry(const PlanarFrame420& a, const PlanarFrame420& b) {
  if (a.width != b.width || a.height != b.height || a.bit_depth != b.bit_depth)
    throw ValidationError("metric: frame geometry mismatch (" + std::to_string(a.width) + "x" +
                          std::to_string(a.height) + "/" + std::to_string(a.bit_depth) +
                          "bit vs " + std::to_string(b.width) + "x" +
                          std::to_string(b.height) + "/" + std::to_string(b.bit_depth) +
                          "bit)");
}

}  // namespace

double psnr(const PlanarFrame420& ref, const PlanarFrame420& test) {
  validate_frame(ref);
  validate_frame(test);
  check_same_geometry(ref, test);
  const double peak = static_cast<double>((1u << ref.bit_depth) - 1);
  double sq = 0;
  for (std::size_t i = 0; i < ref.y.size(); ++i) {
    const double d = static_cast<double>(ref.y[i]) - static_cast<double>(test.y[i]);
    sq += d * d;
  }
  const double mse = sq / static_cast<double>(ref.y.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double ssim_metric(const PlanarFrame420& ref, const PlanarFrame420& test,
                   const SsimParams& params) {
  validate_frame(ref);
  validate_frame(test);
  check_same_geometry(ref, test);
  const float peak = static_cast<float>((1u << ref.bit_depth) - 1);
  Tensor4f a({1, 1, ref.height, ref.width});
  Tensor4f b(a.dims());
  for (std::size_t i = 0; i < ref.y.size(); ++i) {
    // Normalize to [0,1], then to the [-1,1] domain the loss-module SSIM takes.
    a[static_cast<std::int64_t>(i)] = 2.0f * (static_cast<float>(ref.y[i]) / peak) - 1.0f;
    b[static_cast<std::int64_t>(i)] = 2.0f * (static_cast<float>(test.y[i]) / peak) - 1.0f;
  }
  return static_cast<double>(ssim(a, b, params));
}

}  // namespace ppkit
