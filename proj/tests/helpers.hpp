#pragma once

#include <sys/wait.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ppkit/kernels.hpp"
#include "ppkit/random.hpp"
#include "ppkit/tensor.hpp"
#include "ppkit/yuv.hpp"

namespace testkit {

using ppkit::Dims4;
using ppkit::Padding;
using ppkit::Rng;
using ppkit::Tensor4;
using Tensor4d = ppkit::Tensor4<double>;
using ppkit::Tensor4f;

// Scratch directory removed on destruction.
class TempDir {
public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "ppkit-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

private:
  std::string path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

// ---- CLI driver (binary path injected by the build) ----

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

inline CliResult run_cli(const std::string& args) {
  static const TempDir io;
  static int counter = 0;
  const std::string out_path = io.file("out" + std::to_string(counter));
  const std::string err_path = io.file("err" + std::to_string(counter));
  ++counter;
  const std::string cmd =
      std::string(PPKIT_CLI_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
  const int raw = std::system(cmd.c_str());
  CliResult r;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  if (raw != -1 && WIFEXITED(raw)) r.code = WEXITSTATUS(raw);
  return r;
}

inline std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> lines;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

// ---- numeric checks ----

inline double rel_err(double a, double b, double floor = 1e-6) {
  const double denom = std::max({std::fabs(a), std::fabs(b), floor});
  return std::fabs(a - b) / denom;
}

// Central finite differences of `loss()` with respect to every element of
// `x` (mutated in place and restored), against an analytic gradient. Returns
// the worst relative error. Raise `floor` (the denominator's lower bound)
// for losses built on kinked activations: a perturbation that shifts a
// pre-activation across a kink adds O(h^2)/2h noise to the difference
// quotient, which dominates near-zero gradient components.
template <typename F>
double fd_max_rel_err(F&& loss, Tensor4d& x, const Tensor4d& analytic, double h = 1e-5,
                      double floor = 1e-6) {
  if (!x.same_shape(analytic)) throw std::runtime_error("fd_max_rel_err: shape mismatch");
  double worst = 0;
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double lp = loss();
    x[i] = orig - h;
    const double lm = loss();
    x[i] = orig;
    worst = std::max(worst, rel_err(analytic[i], (lp - lm) / (2 * h), floor));
  }
  return worst;
}

template <typename T>
Tensor4<T> random_tensor(const Dims4& d, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor4<T> t(d);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// ---- independent convolution oracle (plain quadruple loop) ----

template <typename T>
Tensor4<T> oracle_conv2d(const Tensor4<T>& x, const Tensor4<T>& k, const Tensor4<T>& b,
                         std::int64_t stride, Padding pad) {
  const Dims4 xd = x.dims(), kd = k.dims();
  std::int64_t oh, ow, pad_top, pad_left;
  if (pad == Padding::kSame) {
    oh = (xd.h + stride - 1) / stride;
    ow = (xd.w + stride - 1) / stride;
    const std::int64_t th = std::max<std::int64_t>(0, (oh - 1) * stride + kd.h - xd.h);
    const std::int64_t tw = std::max<std::int64_t>(0, (ow - 1) * stride + kd.w - xd.w);
    pad_top = th / 2;
    pad_left = tw / 2;
  } else {
    oh = (xd.h - kd.h) / stride + 1;
    ow = (xd.w - kd.w) / stride + 1;
    pad_top = pad_left = 0;
  }
  Tensor4<T> out({xd.n, kd.n, oh, ow});
  for (std::int64_t n = 0; n < xd.n; ++n)
    for (std::int64_t oc = 0; oc < kd.n; ++oc)
      for (std::int64_t i = 0; i < oh; ++i)
        for (std::int64_t j = 0; j < ow; ++j) {
          T acc = b.at(0, oc, 0, 0);
          for (std::int64_t ic = 0; ic < kd.c; ++ic)
            for (std::int64_t ki = 0; ki < kd.h; ++ki)
              for (std::int64_t kj = 0; kj < kd.w; ++kj) {
                const std::int64_t yi = i * stride + ki - pad_top;
                const std::int64_t xj = j * stride + kj - pad_left;
                if (yi < 0 || yi >= xd.h || xj < 0 || xj >= xd.w) continue;
                acc += x.at(n, ic, yi, xj) * k.at(oc, ic, ki, kj);
              }
          out.at(n, oc, i, j) = acc;
        }
  return out;
}

// ---- YUV fixtures ----

// Frame whose planes are filled from a deterministic RNG over the legal code
// range for the bit depth.
inline ppkit::PlanarFrame420 random_frame(std::int64_t w, std::int64_t h, int depth,
                                          Rng& rng) {
  ppkit::PlanarFrame420 f = ppkit::make_frame(w, h, depth);
  const std::uint64_t maxv = depth == 8 ? 255 : 1023;
  for (auto& v : f.y) v = static_cast<std::uint16_t>(rng.below(maxv + 1));
  for (auto& v : f.cb) v = static_cast<std::uint16_t>(rng.below(maxv + 1));
  for (auto& v : f.cr) v = static_cast<std::uint16_t>(rng.below(maxv + 1));
  return f;
}

// Grayscale frame from a [0,1] luma plane: Y quantized to limited range,
// chroma at the neutral code.
inline ppkit::PlanarFrame420 gray_frame(const std::vector<double>& luma, std::int64_t w,
                                        std::int64_t h, int depth) {
  ppkit::PlanarFrame420 f = ppkit::make_frame(w, h, depth);
  const double scale = depth == 8 ? 1.0 : 4.0;
  for (std::int64_t i = 0; i < w * h; ++i) {
    const double v = std::min(1.0, std::max(0.0, luma[static_cast<std::size_t>(i)]));
    f.y[static_cast<std::size_t>(i)] =
        static_cast<std::uint16_t>(std::llround(scale * (219.0 * v + 16.0)));
  }
  const auto neutral = static_cast<std::uint16_t>(std::llround(scale * 128.0));
  for (auto& v : f.cb) v = neutral;
  for (auto& v : f.cr) v = neutral;
  return f;
}

}  // namespace testkit
