#pragma once

#include "ppkit/losses.hpp"
#include "ppkit/yuv.hpp"

namespace ppkit {

// Zero-MSE (and generally any value above the cap) reports this, so sequence
// averages stay finite.
inline constexpr double kPsnrCap = 100.0;

// Y-plane PSNR in dB against peak = 2^bit_depth - 1.
double psnr(const PlanarFrame420& ref, const PlanarFrame420& test);

// SSIM on the normalized Y plane; delegates to the loss-module SSIM.
double ssim_metric(const PlanarFrame420& ref, const PlanarFrame420& test,
                   const SsimParams& params = {});

}  // namespace ppkit
