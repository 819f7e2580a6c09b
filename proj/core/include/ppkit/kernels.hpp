#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ppkit/tensor.hpp"

namespace ppkit {

// Plain (non-recording) tensor kernels. The autodiff tape and the streaming
// inference path both call these, so the two paths are bitwise identical.

enum class Padding { kSame, kValid };

struct ConvGeom {
  std::int64_t out_h = 0, out_w = 0;
  std::int64_t pad_top = 0, pad_left = 0;
};

inline ConvGeom conv_geometry(std::int64_t h, std::int64_t w, std::int64_t kh,
                              std::int64_t kw, std::int64_t stride, Padding padding) {
  if (stride < 1) throw ValidationError("conv2d: stride must be >= 1");
  ConvGeom g;
  if (padding == Padding::kSame) {
    if (kh % 2 == 0 || kw % 2 == 0)
      throw ValidationError("conv2d: same-padding requires odd kernel dims");
    g.out_h = (h + stride - 1) / stride;
    g.out_w = (w + stride - 1) / stride;
    const std::int64_t pad_h = std::max<std::int64_t>((g.out_h - 1) * stride + kh - h, 0);
    const std::int64_t pad_w = std::max<std::int64_t>((g.out_w - 1) * stride + kw - w, 0);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  } else {
    if (h < kh || w < kw)
      throw ValidationError("conv2d: input smaller than kernel in valid mode");
    g.out_h = (h - kh) / stride + 1;
    g.out_w = (w - kw) / stride + 1;
  }
  return g;
}

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

namespace detail {

// Unpack one batch item into the (in_c*kh*kw) x (out_h*out_w) patch matrix.
template <typename T>
void im2col(const T* x, std::int64_t c, std::int64_t h, std::int64_t w, std::int64_t kh,
            std::int64_t kw, std::int64_t stride, const ConvGeom& g, T* col) {
  const std::int64_t cols = g.out_h * g.out_w;
  for (std::int64_t ic = 0; ic < c; ++ic) {
    for (std::int64_t r = 0; r < kh; ++r) {
      for (std::int64_t s = 0; s < kw; ++s) {
        T* dst = col + ((ic * kh + r) * kw + s) * cols;
        for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
          const std::int64_t ih = oh * stride + r - g.pad_top;
          if (ih < 0 || ih >= h) {
            std::fill(dst, dst + g.out_w, T(0));
            dst += g.out_w;
            continue;
          }
          const T* src_row = x + (ic * h + ih) * w;
          for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
            const std::int64_t iw = ow * stride + s - g.pad_left;
            *dst++ = (iw < 0 || iw >= w) ? T(0) : src_row[iw];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, std::int64_t c, std::int64_t h, std::int64_t w,
                std::int64_t kh, std::int64_t kw, std::int64_t stride, const ConvGeom& g,
                T* x) {
  const std::int64_t cols = g.out_h * g.out_w;
  for (std::int64_t ic = 0; ic < c; ++ic) {
    for (std::int64_t r = 0; r < kh; ++r) {
      for (std::int64_t s = 0; s < kw; ++s) {
        const T* src = col + ((ic * kh + r) * kw + s) * cols;
        for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
          const std::int64_t ih = oh * stride + r - g.pad_top;
          if (ih < 0 || ih >= h) {
            src += g.out_w;
            continue;
          }
          T* dst_row = x + (ic * h + ih) * w;
          for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
            const std::int64_t iw = ow * stride + s - g.pad_left;
            if (iw >= 0 && iw < w) dst_row[iw] += src[ow];
          }
          src += g.out_w;
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
void check_conv_args(const Tensor4<T>& x, const Tensor4<T>& kernel, const Tensor4<T>& bias) {
  if (x.dims().count() == 0 || kernel.dims().count() == 0)
    throw ValidationError("conv2d: zero-sized input or kernel " + x.dims().to_string() +
                          " / " + kernel.dims().to_string());
  if (x.dims().c != kernel.dims().c)
    throw ValidationError("conv2d: input channels " + std::to_string(x.dims().c) +
                          " != kernel in-channels " + std::to_string(kernel.dims().c));
  if (bias.dims() != Dims4{1, kernel.dims().n, 1, 1})
    throw ValidationError("conv2d: bias dims " + bias.dims().to_string() +
                          " do not match out-channels " + std::to_string(kernel.dims().n));
}

// kernel dims: (out_c, in_c, kh, kw); bias dims: (1, out_c, 1, 1).
template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& x, const Tensor4<T>& kernel, const Tensor4<T>& bias,
                  std::int64_t stride, Padding padding) {
  check_conv_args(x, kernel, bias);
  const auto& d = x.dims();
  const auto& kd = kernel.dims();
  const ConvGeom g = conv_geometry(d.h, d.w, kd.h, kd.w, stride, padding);
  const std::int64_t rows = kd.c * kd.h * kd.w;
  const std::int64_t cols = g.out_h * g.out_w;

  Tensor4<T> y({d.n, kd.n, g.out_h, g.out_w});
  std::vector<T> col(static_cast<std::size_t>(rows * cols));
  ConstMatMap<T> kmat(kernel.data(), kd.n, rows);
  for (std::int64_t n = 0; n < d.n; ++n) {
    detail::im2col(x.data() + n * d.c * d.h * d.w, d.c, d.h, d.w, kd.h, kd.w, stride, g,
                   col.data());
    ConstMatMap<T> cmat(col.data(), rows, cols);
    MatMap<T> ymat(y.data() + n * kd.n * cols, kd.n, cols);
    ymat.noalias() = kmat * cmat;
    for (std::int64_t oc = 0; oc < kd.n; ++oc) ymat.row(oc).array() += bias[oc];
  }
  return y;
}

// Accumulates gradients into dx/dkernel/dbias (all pre-sized, typically zero).
template <typename T>
void conv2d_backward(const Tensor4<T>& x, const Tensor4<T>& kernel, std::int64_t stride,
                     Padding padding, const Tensor4<T>& dy, Tensor4<T>* dx,
                     Tensor4<T>* dkernel, Tensor4<T>* dbias) {
  const auto& d = x.dims();
  const auto& kd = kernel.dims();
  const ConvGeom g = conv_geometry(d.h, d.w, kd.h, kd.w, stride, padding);
  const std::int64_t rows = kd.c * kd.h * kd.w;
  const std::int64_t cols = g.out_h * g.out_w;

  std::vector<T> col(static_cast<std::size_t>(rows * cols));
  std::vector<T> dcol(static_cast<std::size_t>(rows * cols));
  ConstMatMap<T> kmat(kernel.data(), kd.n, rows);
  for (std::int64_t n = 0; n < d.n; ++n) {
    ConstMatMap<T> dymat(dy.data() + n * kd.n * cols, kd.n, cols);
    if (dkernel) {
      detail::im2col(x.data() + n * d.c * d.h * d.w, d.c, d.h, d.w, kd.h, kd.w, stride, g,
                     col.data());
      ConstMatMap<T> cmat(col.data(), rows, cols);
      MatMap<T> dkmat(dkernel->data(), kd.n, rows);
      dkmat.noalias() += dymat * cmat.transpose();
    }
    if (dbias) {
      // Fixed-order accumulation: Eigen's redux peels to an aligned boundary, so
      // its summation order (and rounding) would depend on the buffer address.
      const T* dyp = dy.data() + n * kd.n * cols;
      for (std::int64_t oc = 0; oc < kd.n; ++oc) {
        T acc(0);
        for (std::int64_t i = 0; i < cols; ++i) acc += dyp[oc * cols + i];
        (*dbias)[oc] += acc;
      }
    }
    if (dx) {
      MatMap<T> dcmat(dcol.data(), rows, cols);
      dcmat.noalias() = kmat.transpose() * dymat;
      detail::col2im_add(dcol.data(), d.c, d.h, d.w, kd.h, kd.w, stride, g,
                         dx->data() + n * d.c * d.h * d.w);
    }
  }
}

// weights dims: (out_features, in_features, 1, 1); bias (1, out_features, 1, 1).
// Input is flattened per batch item: features = c*h*w.
template <typename T>
Tensor4<T> dense(const Tensor4<T>& x, const Tensor4<T>& weights, const Tensor4<T>& bias) {
  const std::int64_t features = x.dims().c * x.dims().h * x.dims().w;
  const auto& wd = weights.dims();
  if (wd.c * wd.h * wd.w != features)
    throw ValidationError("dense: weight columns " + std::to_string(wd.c * wd.h * wd.w) +
                          " != input features " + std::to_string(features));
  if (bias.dims() != Dims4{1, wd.n, 1, 1})
    throw ValidationError("dense: bias dims " + bias.dims().to_string() +
                          " do not match out features " + std::to_string(wd.n));
  Tensor4<T> y({x.dims().n, wd.n, 1, 1});
  ConstMatMap<T> xm(x.data(), x.dims().n, features);
  ConstMatMap<T> wm(weights.data(), wd.n, features);
  MatMap<T> ym(y.data(), x.dims().n, wd.n);
  ym.noalias() = xm * wm.transpose();
  for (std::int64_t n = 0; n < x.dims().n; ++n)
    for (std::int64_t o = 0; o < wd.n; ++o) y.at(n, o, 0, 0) += bias[o];
  return y;
}

template <typename T>
void dense_backward(const Tensor4<T>& x, const Tensor4<T>& weights, const Tensor4<T>& dy,
                    Tensor4<T>* dx, Tensor4<T>* dweights, Tensor4<T>* dbias) {
  const std::int64_t features = x.dims().c * x.dims().h * x.dims().w;
  const auto& wd = weights.dims();
  ConstMatMap<T> xm(x.data(), x.dims().n, features);
  ConstMatMap<T> wm(weights.data(), wd.n, features);
  ConstMatMap<T> dym(dy.data(), x.dims().n, wd.n);
  if (dx) {
    MatMap<T> dxm(dx->data(), x.dims().n, features);
    dxm.noalias() += dym * wm;
  }
  if (dweights) {
    MatMap<T> dwm(dweights->data(), wd.n, features);
    dwm.noalias() += dym.transpose() * xm;
  }
  if (dbias) {
    for (std::int64_t n = 0; n < x.dims().n; ++n)
      for (std::int64_t o = 0; o < wd.n; ++o) (*dbias)[o] += dy.at(n, o, 0, 0);
  }
}

// ---- elementwise activations ----

template <typename T>
Tensor4<T> prelu(const Tensor4<T>& x, const Tensor4<T>& slope) {
  if (slope.dims() != Dims4{1, x.dims().c, 1, 1})
    throw ValidationError("prelu: slope dims " + slope.dims().to_string() +
                          " do not match channels " + std::to_string(x.dims().c));
  Tensor4<T> y(x.dims());
  const std::int64_t plane = x.dims().h * x.dims().w;
  for (std::int64_t n = 0; n < x.dims().n; ++n)
    for (std::int64_t c = 0; c < x.dims().c; ++c) {
      const T a = slope[c];
      const T* src = x.data() + (n * x.dims().c + c) * plane;
      T* dst = y.data() + (n * x.dims().c + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) dst[i] = src[i] >= T(0) ? src[i] : a * src[i];
    }
  return y;
}

template <typename T>
void prelu_backward(const Tensor4<T>& x, const Tensor4<T>& slope, const Tensor4<T>& dy,
                    Tensor4<T>* dx, Tensor4<T>* dslope) {
  const std::int64_t plane = x.dims().h * x.dims().w;
  for (std::int64_t n = 0; n < x.dims().n; ++n)
    for (std::int64_t c = 0; c < x.dims().c; ++c) {
      const T a = slope[c];
      const std::int64_t base = (n * x.dims().c + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        const T xv = x[base + i];
        const T g = dy[base + i];
        if (dx) (*dx)[base + i] += xv >= T(0) ? g : a * g;
        if (dslope && xv < T(0)) (*dslope)[c] += g * xv;
      }
    }
}

template <typename T>
Tensor4<T> leaky_relu(const Tensor4<T>& x, T slope) {
  Tensor4<T> y(x.dims());
  for (std::int64_t i = 0; i < x.size(); ++i)
    y[i] = x[i] >= T(0) ? x[i] : slope * x[i];
  return y;
}

template <typename T>
Tensor4<T> tanh_t(const Tensor4<T>& x) {
  Tensor4<T> y(x.dims());
  for (std::int64_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

template <typename T>
Tensor4<T> sigmoid_t(const Tensor4<T>& x) {
  Tensor4<T> y(x.dims());
  for (std::int64_t i = 0; i < x.size(); ++i) {
    // Split by sign so exp never overflows.
    const T v = x[i];
    y[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                     : std::exp(v) / (T(1) + std::exp(v));
  }
  return y;
}

// ---- batch normalization ----

template <typename T>
struct BatchNormCache {
  std::vector<T> mean;     // per channel
  std::vector<T> inv_std;  // per channel, 1/sqrt(var+eps)
};

// Train mode: normalize by batch statistics, return updated running stats via
// new_running_* (biased variance, momentum blend). Infer mode: use running stats.
template <typename T>
Tensor4<T> batch_norm(const Tensor4<T>& x, const Tensor4<T>& scale, const Tensor4<T>& shift,
                      const Tensor4<T>& running_mean, const Tensor4<T>& running_var,
                      bool train, T eps, T momentum, BatchNormCache<T>* cache = nullptr,
                      Tensor4<T>* new_running_mean = nullptr,
                      Tensor4<T>* new_running_var = nullptr) {
  const auto& d = x.dims();
  if (scale.dims() != Dims4{1, d.c, 1, 1} || shift.dims() != Dims4{1, d.c, 1, 1})
    throw ValidationError("batch_norm: scale/shift dims do not match channels");
  const std::int64_t plane = d.h * d.w;
  const std::int64_t m = d.n * plane;
  if (train && m == 0) throw ValidationError("batch_norm: empty batch in train mode");

  std::vector<T> mean(static_cast<std::size_t>(d.c)), inv_std(static_cast<std::size_t>(d.c));
  if (train) {
    for (std::int64_t c = 0; c < d.c; ++c) {
      T sum = 0, sum_sq = 0;
      for (std::int64_t n = 0; n < d.n; ++n) {
        const T* src = x.data() + (n * d.c + c) * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
          sum += src[i];
          sum_sq += src[i] * src[i];
        }
      }
      const T mu = sum / static_cast<T>(m);
      const T var = std::max<T>(sum_sq / static_cast<T>(m) - mu * mu, T(0));
      mean[c] = mu;
      inv_std[c] = T(1) / std::sqrt(var + eps);
      if (new_running_mean)
        (*new_running_mean)[c] = momentum * running_mean[c] + (T(1) - momentum) * mu;
      if (new_running_var)
        (*new_running_var)[c] = momentum * running_var[c] + (T(1) - momentum) * var;
    }
  } else {
    for (std::int64_t c = 0; c < d.c; ++c) {
      mean[c] = running_mean[c];
      inv_std[c] = T(1) / std::sqrt(running_var[c] + eps);
    }
  }

  Tensor4<T> y(d);
  for (std::int64_t n = 0; n < d.n; ++n)
    for (std::int64_t c = 0; c < d.c; ++c) {
      const T mu = mean[c], is = inv_std[c], g = scale[c], b = shift[c];
      const T* src = x.data() + (n * d.c + c) * plane;
      T* dst = y.data() + (n * d.c + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) dst[i] = g * (src[i] - mu) * is + b;
    }
  if (cache) {
    cache->mean = std::move(mean);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
void batch_norm_backward(const Tensor4<T>& x, const Tensor4<T>& scale,
                         const BatchNormCache<T>& cache, bool train, const Tensor4<T>& dy,
                         Tensor4<T>* dx, Tensor4<T>* dscale, Tensor4<T>* dshift) {
  const auto& d = x.dims();
  const std::int64_t plane = d.h * d.w;
  const std::int64_t m = d.n * plane;
  for (std::int64_t c = 0; c < d.c; ++c) {
    const T mu = cache.mean[c], is = cache.inv_std[c], g = scale[c];
    T sum_dy = 0, sum_dy_xhat = 0;
    for (std::int64_t n = 0; n < d.n; ++n) {
      const std::int64_t base = (n * d.c + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        const T xhat = (x[base + i] - mu) * is;
        sum_dy += dy[base + i];
        sum_dy_xhat += dy[base + i] * xhat;
      }
    }
    if (dscale) (*dscale)[c] += sum_dy_xhat;
    if (dshift) (*dshift)[c] += sum_dy;
    if (dx) {
      if (train) {
        const T mean_dy = sum_dy / static_cast<T>(m);
        const T mean_dy_xhat = sum_dy_xhat / static_cast<T>(m);
        for (std::int64_t n = 0; n < d.n; ++n) {
          const std::int64_t base = (n * d.c + c) * plane;
          for (std::int64_t i = 0; i < plane; ++i) {
            const T xhat = (x[base + i] - mu) * is;
            (*dx)[base + i] += g * is * (dy[base + i] - mean_dy - xhat * mean_dy_xhat);
          }
        }
      } else {
        for (std::int64_t n = 0; n < d.n; ++n) {
          const std::int64_t base = (n * d.c + c) * plane;
          for (std::int64_t i = 0; i < plane; ++i) (*dx)[base + i] += g * is * dy[base + i];
        }
      }
    }
  }
}

// ---- pooling ----

// 2x2 mean pooling with stride 2; odd trailing row/column is dropped.
template <typename T>
Tensor4<T> avg_pool2(const Tensor4<T>& x) {
  const auto& d = x.dims();
  const std::int64_t oh = d.h / 2, ow = d.w / 2;
  if (oh == 0 || ow == 0) throw ValidationError("avg_pool2: input too small " + d.to_string());
  Tensor4<T> y({d.n, d.c, oh, ow});
  for (std::int64_t n = 0; n < d.n; ++n)
    for (std::int64_t c = 0; c < d.c; ++c)
      for (std::int64_t i = 0; i < oh; ++i)
        for (std::int64_t j = 0; j < ow; ++j) {
          const T s = x.at(n, c, 2 * i, 2 * j) + x.at(n, c, 2 * i, 2 * j + 1) +
                      x.at(n, c, 2 * i + 1, 2 * j) + x.at(n, c, 2 * i + 1, 2 * j + 1);
          y.at(n, c, i, j) = s * T(0.25);
        }
  return y;
}

template <typename T>
void avg_pool2_backward(const Dims4& in_dims, const Tensor4<T>& dy, Tensor4<T>* dx) {
  const std::int64_t oh = in_dims.h / 2, ow = in_dims.w / 2;
  for (std::int64_t n = 0; n < in_dims.n; ++n)
    for (std::int64_t c = 0; c < in_dims.c; ++c)
      for (std::int64_t i = 0; i < oh; ++i)
        for (std::int64_t j = 0; j < ow; ++j) {
          const T g = dy.at(n, c, i, j) * T(0.25);
          dx->at(n, c, 2 * i, 2 * j) += g;
          dx->at(n, c, 2 * i, 2 * j + 1) += g;
          dx->at(n, c, 2 * i + 1, 2 * j) += g;
          dx->at(n, c, 2 * i + 1, 2 * j + 1) += g;
        }
}

}  // namespace ppkit
