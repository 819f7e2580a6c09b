#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ppkit/errors.hpp"

namespace ppkit {

struct RateQualityPoint {
  double bitrate_kbps = 0;
  double quality = 0;
  std::optional<double> qp;  // annotation for QP-range selection
};

struct RateQualityCurve {
  std::string label;
  std::vector<RateQualityPoint> points;
};

// Requires >= 4 points with strictly increasing positive bitrate and strictly
// increasing quality.
void validate_curve(const RateQualityCurve& curve);

// Cubic least-squares fit of log10(rate) as a function of quality (centered
// per curve), integrated over the shared quality interval.
// Result is percent; negative means the test curve saves bitrate.
double bd_rate(const RateQualityCurve& anchor, const RateQualityCurve& test);

// Coefficients c0..c3 of the centered fit for one curve, plus the center;
// exposed so the oracle test can integrate the same polynomial numerically.
struct LogRateFit {
  double center = 0;
  std::array<double, 4> coeff{};  // c0 + c1 u + c2 u^2 + c3 u^3, u = quality - center
};
LogRateFit fit_log_rate(const RateQualityCurve& curve);
double eval_fit(const LogRateFit& fit, double quality);

// CSV `bitrate_kbps,quality[,qp]` with header, values at 6 significant digits.
RateQualityCurve curve_from_csv(const std::string& path);
void curve_to_csv(const RateQualityCurve& curve, const std::string& path);

// VVC QP ranges: low = {22,27,32,37}, high = {27,32,37,42}. All requested QPs
// must be annotated on the curve.
RateQualityCurve qp_subrange(const RateQualityCurve& curve, const std::string& range);

}  // namespace ppkit
