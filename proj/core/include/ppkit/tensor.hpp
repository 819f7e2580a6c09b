#pragma once

#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include "ppkit/errors.hpp"

namespace ppkit {

// Shape of a rank-4 tensor: (batch, channels, height, width).
struct Dims4 {
  std::int64_t n = 0;
  std::int64_t c = 0;
  std::int64_t h = 0;
  std::int64_t w = 0;

  std::int64_t count() const { return n * c * h * w; }
  bool operator==(const Dims4&) const = default;

  std::string to_string() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) +
           "," + std::to_string(w) + ")";
  }
};

// Dense rank-4 array in row-major (n,c,h,w) order. T is float for runtime
// inference/training and double for the finite-difference test paths.
template <typename T>
class Tensor4 {
  static_assert(std::is_floating_point_v<T>);

public:
  Tensor4() = default;

  explicit Tensor4(Dims4 d) : dims_(d) {
    validate_dims(d);
    data_.assign(static_cast<std::size_t>(d.count()), T(0));
  }

  Tensor4(Dims4 d, std::vector<T> data) : dims_(d), data_(std::move(data)) {
    validate_dims(d);
    if (static_cast<std::int64_t>(data_.size()) != d.count())
      throw ValidationError("tensor data length " + std::to_string(data_.size()) +
                            " does not match dims " + d.to_string());
  }

  static Tensor4 scalar(T v) { return Tensor4({1, 1, 1, 1}, {v}); }
  static Tensor4 full(Dims4 d, T v) {
    Tensor4 t(d);
    t.fill(v);
    return t;
  }

  const Dims4& dims() const { return dims_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  T operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  T& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
    return data_[index(n, c, h, w)];
  }
  T at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return data_[index(n, c, h, w)];
  }

  std::size_t index(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
    return static_cast<std::size_t>(((n * dims_.c + c) * dims_.h + h) * dims_.w + w);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor4& o) const { return dims_ == o.dims_; }

  // Scalar convenience for 1-element tensors (loss values).
  T item() const {
    if (data_.size() != 1)
      throw ValidationError("item() on non-scalar tensor " + dims_.to_string());
    return data_[0];
  }

  template <typename U>
  Tensor4<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Tensor4<U>(dims_, std::move(out));
  }

private:
  static void validate_dims(const Dims4& d) {
    if (d.n < 0 || d.c < 0 || d.h < 0 || d.w < 0)
      throw ValidationError("negative tensor dims " + d.to_string());
  }

  Dims4 dims_;
  std::vector<T> data_;
};

using Tensor4f = Tensor4<float>;
using Tensor4d = Tensor4<double>;

}  // namespace ppkit
