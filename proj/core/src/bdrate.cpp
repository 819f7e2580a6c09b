#include "ppkit/bdrate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ppkit {

void validate_curve(const RateQualityCurve& c) {
  const std::string tag = c.label.empty() ? "curve" : "curve '" + c.label + "'";
  if (c.points.size() < 4)
    throw ValidationError(tag + ": need at least 4 points, got " +
                          std::to_string(c.points.size()));
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const auto& p = c.points[i];
    if (!(p.bitrate_kbps > 0) || !std::isfinite(p.bitrate_kbps))
      throw ValidationError(tag + ": bitrate must be positive and finite at point " +
                            std::to_string(i));
    if (!std::isfinite(p.quality))
      throw ValidationError(tag + ": quality must be finite at point " + std::to_string(i));
    if (i > 0) {
      if (!(p.bitrate_kbps > c.points[i - 1].bitrate_kbps))
        throw ValidationError(tag + ": bitrate not strictly increasing at point " +
                              std::to_string(i));
      if (!(p.quality > c.points[i - 1].quality))
        throw ValidationError(tag + ": quality not strictly increasing at point " +
                              std::to_string(i));
    }
  }
}

LogRateFit fit_log_rate(const RateQualityCurve& curve) {
  validate_curve(curve);
  const auto n = static_cast<Eigen::Index>(curve.points.size());
  LogRateFit fit;
  for (const auto& p : curve.points) fit.center += p.quality;
  fit.center /= static_cast<double>(n);

  Eigen::MatrixXd a(n, 4);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = curve.points[static_cast<std::size_t>(i)].quality - fit.center;
    a(i, 0) = 1.0;
    a(i, 1) = u;
    a(i, 2) = u * u;
    a(i, 3) = u * u * u;
    y(i) = std::log10(curve.points[static_cast<std::size_t>(i)].bitrate_kbps);
  }
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(y);
  for (int i = 0; i < 4; ++i) fit.coeff[static_cast<std::size_t>(i)] = c(i);
  return fit;
}

double eval_fit(const LogRateFit& f, double quality) {
  const double u = quality - f.center;
  return f.coeff[0] + u * (f.coeff[1] + u * (f.coeff[2] + u * f.coeff[3]));
}

namespace {

// Closed-form integral of the centered cubic over [lo, hi] in quality space.
double integrate_fit(const LogRateFit& f, double lo, double hi) {
  auto antiderivative = [&](double q) {
    const double u = q - f.center;
    return u * (f.coeff[0] +
                u * (f.coeff[1] / 2.0 + u * (f.coeff[2] / 3.0 + u * f.coeff[3] / 4.0)));
  };
  return antiderivative(hi) - antiderivative(lo);
}

}  // namespace

double bd_rate(const RateQualityCurve& anchor, const RateQualityCurve& test) {
  validate_curve(anchor);
  validate_curve(test);
  const double lo = std::max(anchor.points.front().quality, test.points.front().quality);
  const double hi = std::min(anchor.points.back().quality, test.points.back().quality);
  if (!(hi > lo))
    throw ValidationError("bd_rate: quality ranges do not overlap (anchor [" +
                          std::to_string(anchor.points.front().quality) + ", " +
                          std::to_string(anchor.points.back().quality) + "], test [" +
                          std::to_string(test.points.front().quality) + ", " +
                          std::to_string(test.points.back().quality) + "])");
  const LogRateFit fa = fit_log_rate(anchor);
  const LogRateFit ft = fit_log_rate(test);
  const double mean_diff = (integrate_fit(ft, lo, hi) - integrate_fit(fa, lo, hi)) / (hi - lo);
  return (std::pow(10.0, mean_diff) - 1.0) * 100.0;
}

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double parse_cell(const std::string& path, std::int64_t line_no, const std::string& cell) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw FormatError(path + ":" + std::to_string(line_no) + ": not a number: '" + cell +
                      "'");
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ls(line);
  while (std::getline(ls, cell, ',')) {
    // trim surrounding whitespace
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return cells;
}

}  // namespace

RateQualityCurve curve_from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open curve file " + path);
  RateQualityCurve curve;
  curve.label = std::filesystem::path(path).stem().string();
  std::string line;
  std::int64_t line_no = 0;
  bool with_qp = false;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file");
  ++line_no;
  {
    const auto header = split_csv_line(line);
    if (header.size() == 3 && header[0] == "bitrate_kbps" && header[1] == "quality" &&
        header[2] == "qp")
      with_qp = true;
    else if (header.size() == 2 && header[0] == "bitrate_kbps" && header[1] == "quality")
      with_qp = false;
    else
      throw FormatError(path + ":1: expected header `bitrate_kbps,quality[,qp]`, got '" +
                        line + "'");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != (with_qp ? 3u : 2u))
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(with_qp ? 3 : 2) + " cells, got " +
                        std::to_string(cells.size()));
    RateQualityPoint p;
    p.bitrate_kbps = parse_cell(path, line_no, cells[0]);
    p.quality = parse_cell(path, line_no, cells[1]);
    if (with_qp) p.qp = parse_cell(path, line_no, cells[2]);
    curve.points.push_back(p);
  }
  validate_curve(curve);
  return curve;
}

void curve_to_csv(const RateQualityCurve& curve, const std::string& path) {
  validate_curve(curve);
  const bool with_qp =
      std::all_of(curve.points.begin(), curve.points.end(),
                  [](const RateQualityPoint& p) { return p.qp.has_value(); });
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << (with_qp ? "bitrate_kbps,quality,qp\n" : "bitrate_kbps,quality\n");
  for (const auto& p : curve.points) {
    out << fmt6(p.bitrate_kbps) << "," << fmt6(p.quality);
    if (with_qp) out << "," << fmt6(*p.qp);
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

RateQualityCurve qp_subrange(const RateQualityCurve& curve, const std::string& range) {
  std::vector<double> wanted;
  if (range == "low")
    wanted = {22, 27, 32, 37};
  else if (range == "high")
    wanted = {27, 32, 37, 42};
  else
    throw ValidationError("qp range must be 'low' or 'high', got '" + range + "'");
  RateQualityCurve out;
  out.label = curve.label + "." + range;
  for (double qp : wanted) {
    const bool found = std::any_of(curve.points.begin(), curve.points.end(),
                                   [qp](const RateQualityPoint& p) { return p.qp && *p.qp == qp; });
    if (!found)
      throw ValidationError("curve '" + curve.label + "' has no point annotated QP " +
                            std::to_string(static_cast<int>(qp)) + " for range '" + range +
                            "'");
  }
  // Keep the curve's own ordering so monotonicity is preserved.
  for (const auto& p : curve.points)
    if (p.qp && std::find(wanted.begin(), wanted.end(), *p.qp) != wanted.end())
      out.points.push_back(p);
  validate_curve(out);
  return out;
}

}  // namespace ppkit
