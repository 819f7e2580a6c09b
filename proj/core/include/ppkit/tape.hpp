#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ppkit/kernels.hpp"
#include "ppkit/tensor.hpp"

namespace ppkit {

// Reverse-mode tape. Forward values are computed eagerly as ops are recorded;
// backward() walks the recorded nodes in reverse. Leaves registered through
// parameter() can be queried by name afterwards; leaves that never feed the
// loss keep an all-zero gradient.
template <typename T>
class Tape {
public:
  using Ref = std::int32_t;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Ref constant(Tensor4<T> v) { return push(std::move(v), false, {}); }
  Ref scalar(T v) { return constant(Tensor4<T>::scalar(v)); }

  // Grad-tracked anonymous leaf (used for loss-vs-output gradient checks).
  Ref input(Tensor4<T> v) { return push(std::move(v), true, {}); }

  Ref parameter(const std::string& name, Tensor4<T> v) {
    if (param_refs_.count(name))
      throw ValidationError("tape: duplicate parameter name " + name);
    const Ref r = push(std::move(v), true, {});
    param_refs_.emplace(name, r);
    param_order_.push_back(name);
    return r;
  }

  const Tensor4<T>& value(Ref r) const { return nodes_[static_cast<std::size_t>(r)].value; }

  // Gradient of a node; empty tensor if backward never touched it.
  const Tensor4<T>& grad(Ref r) const { return nodes_[static_cast<std::size_t>(r)].grad; }

  // Gradient for a registered parameter, zeros if it was unused.
  Tensor4<T> parameter_grad(const std::string& name) const {
    auto it = param_refs_.find(name);
    if (it == param_refs_.end()) throw ValidationError("tape: unknown parameter " + name);
    const Node& n = nodes_[static_cast<std::size_t>(it->second)];
    if (n.grad.empty()) return Tensor4<T>(n.value.dims());
    return n.grad;
  }

  const std::vector<std::string>& parameter_names() const { return param_order_; }
  bool has_parameter(const std::string& name) const { return param_refs_.count(name) != 0; }

  Ref parameter_ref(const std::string& name) const {
    auto it = param_refs_.find(name);
    if (it == param_refs_.end()) throw ValidationError("tape: unknown parameter " + name);
    return it->second;
  }

  // ---- recorded operations ----

  Ref conv2d(Ref x, Ref kernel, Ref bias, std::int64_t stride, Padding padding) {
    Tensor4<T> y = ppkit::conv2d(value(x), value(kernel), value(bias), stride, padding);
    return push(std::move(y), tracked(x) || tracked(kernel) || tracked(bias),
                [this, x, kernel, bias, stride, padding](const Tensor4<T>& dy) {
                  conv2d_backward(value(x), value(kernel), stride, padding, dy,
                                  grad_buf(x), grad_buf(kernel), grad_buf(bias));
                });
  }

  Ref dense(Ref x, Ref weights, Ref bias) {
    Tensor4<T> y = ppkit::dense(value(x), value(weights), value(bias));
    return push(std::move(y), tracked(x) || tracked(weights) || tracked(bias),
                [this, x, weights, bias](const Tensor4<T>& dy) {
                  dense_backward(value(x), value(weights), dy, grad_buf(x),
                                 grad_buf(weights), grad_buf(bias));
                });
  }

  Ref prelu(Ref x, Ref slope) {
    Tensor4<T> y = ppkit::prelu(value(x), value(slope));
    return push(std::move(y), tracked(x) || tracked(slope),
                [this, x, slope](const Tensor4<T>& dy) {
                  prelu_backward(value(x), value(slope), dy, grad_buf(x), grad_buf(slope));
                });
  }

  Ref leaky_relu(Ref x, T slope) {
    Tensor4<T> y = ppkit::leaky_relu(value(x), slope);
    return push(std::move(y), tracked(x), [this, x, slope](const Tensor4<T>& dy) {
      Tensor4<T>* dx = grad_buf(x);
      if (!dx) return;
      const Tensor4<T>& xv = value(x);
      for (std::int64_t i = 0; i < xv.size(); ++i)
        (*dx)[i] += xv[i] >= T(0) ? dy[i] : slope * dy[i];
    });
  }

  Ref tanh(Ref x) {
    Tensor4<T> y = tanh_t(value(x));
    const Ref out = push(std::move(y), tracked(x), nullptr);
    set_back(out, [this, x, out](const Tensor4<T>& dy) {
      Tensor4<T>* dx = grad_buf(x);
      if (!dx) return;
      const Tensor4<T>& yv = value(out);
      for (std::int64_t i = 0; i < yv.size(); ++i) (*dx)[i] += dy[i] * (T(1) - yv[i] * yv[i]);
    });
    return out;
  }

  Ref sigmoid(Ref x) {
    Tensor4<T> y = sigmoid_t(value(x));
    const Ref out = push(std::move(y), tracked(x), nullptr);
    set_back(out, [this, x, out](const Tensor4<T>& dy) {
      Tensor4<T>* dx = grad_buf(x);
      if (!dx) return;
      const Tensor4<T>& yv = value(out);
      for (std::int64_t i = 0; i < yv.size(); ++i) (*dx)[i] += dy[i] * yv[i] * (T(1) - yv[i]);
    });
    return out;
  }

  // Running-stat updates (train mode) are written through to the caller's
  // buffers at record time; they are state, not differentiated values.
  Ref batch_norm(Ref x, Ref scale, Ref shift, const Tensor4<T>& running_mean,
                 const Tensor4<T>& running_var, bool train, T eps, T momentum,
                 Tensor4<T>* new_running_mean, Tensor4<T>* new_running_var) {
    auto cache = std::make_shared<BatchNormCache<T>>();
    Tensor4<T> y = ppkit::batch_norm(value(x), value(scale), value(shift), running_mean,
                                     running_var, train, eps, momentum, cache.get(),
                                     new_running_mean, new_running_var);
    return push(std::move(y), tracked(x) || tracked(scale) || tracked(shift),
                [this, x, scale, shift, train, cache](const Tensor4<T>& dy) {
                  batch_norm_backward(value(x), value(scale), *cache, train, dy, grad_buf(x),
                                      grad_buf(scale), grad_buf(shift));
                });
  }

  Ref add(Ref a, Ref b) {
    return binary(a, b, [](T x, T y) { return x + y; },
                  [this, a, b](const Tensor4<T>& dy) {
                    accumulate(a, dy, T(1));
                    accumulate(b, dy, T(1));
                  });
  }

  Ref sub(Ref a, Ref b) {
    return binary(a, b, [](T x, T y) { return x - y; },
                  [this, a, b](const Tensor4<T>& dy) {
                    accumulate(a, dy, T(1));
                    accumulate(b, dy, T(-1));
                  });
  }

  Ref mul(Ref a, Ref b) {
    return binary(a, b, [](T x, T y) { return x * y; },
                  [this, a, b](const Tensor4<T>& dy) {
                    if (Tensor4<T>* da = grad_buf(a)) {
                      const Tensor4<T>& bv = value(b);
                      for (std::int64_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i] * bv[i];
                    }
                    if (Tensor4<T>* db = grad_buf(b)) {
                      const Tensor4<T>& av = value(a);
                      for (std::int64_t i = 0; i < dy.size(); ++i) (*db)[i] += dy[i] * av[i];
                    }
                  });
  }

  Ref div(Ref a, Ref b) {
    return binary(a, b, [](T x, T y) { return x / y; },
                  [this, a, b](const Tensor4<T>& dy) {
                    const Tensor4<T>& av = value(a);
                    const Tensor4<T>& bv = value(b);
                    if (Tensor4<T>* da = grad_buf(a))
                      for (std::int64_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i] / bv[i];
                    if (Tensor4<T>* db = grad_buf(b))
                      for (std::int64_t i = 0; i < dy.size(); ++i)
                        (*db)[i] -= dy[i] * av[i] / (bv[i] * bv[i]);
                  });
  }

  // a*x + b with compile-time constants (domain remaps, loss weighting).
  Ref affine(Ref x, T a, T b) {
    const Tensor4<T>& xv = value(x);
    Tensor4<T> y(xv.dims());
    for (std::int64_t i = 0; i < xv.size(); ++i) y[i] = a * xv[i] + b;
    return push(std::move(y), tracked(x),
                [this, x, a](const Tensor4<T>& dy) { accumulate(x, dy, a); });
  }

  // x + s and x - s where s is a 1-element node broadcast over x.
  Ref add_scalar_node(Ref x, Ref s) { return broadcast_combine(x, s, T(1)); }
  Ref sub_scalar_node(Ref x, Ref s) { return broadcast_combine(x, s, T(-1)); }

  Ref abs(Ref x) {
    const Tensor4<T>& xv = value(x);
    Tensor4<T> y(xv.dims());
    for (std::int64_t i = 0; i < xv.size(); ++i) y[i] = xv[i] < T(0) ? -xv[i] : xv[i];
    return push(std::move(y), tracked(x), [this, x](const Tensor4<T>& dy) {
      Tensor4<T>* dx = grad_buf(x);
      if (!dx) return;
      const Tensor4<T>& xv = value(x);
      for (std::int64_t i = 0; i < xv.size(); ++i)
        (*dx)[i] += xv[i] > T(0) ? dy[i] : (xv[i] < T(0) ? -dy[i] : T(0));
    });
  }

  // ln(max(x, floor)); the clamp keeps saturated GAN probabilities finite.
  Ref log_clamped(Ref x, T floor) {
    const Tensor4<T>& xv = value(x);
    Tensor4<T> y(xv.dims());
    for (std::int64_t i = 0; i < xv.size(); ++i) y[i] = std::log(std::max(xv[i], floor));
    return push(std::move(y), tracked(x), [this, x, floor](const Tensor4<T>& dy) {
      Tensor4<T>* dx = grad_buf(x);
      if (!dx) return;
      const Tensor4<T>& xv = value(x);
      for (std::int64_t i = 0; i < xv.size(); ++i)
        if (xv[i] > floor) (*dx)[i] += dy[i] / xv[i];
    });
  }

  Ref exp(Ref x) {
    const Tensor4<T>& xv = value(x);
    Tensor4<T> y(xv.dims());
    for (std::int64_t i = 0; i < xv.size(); ++i) y[i] = std::exp(xv[i]);
    const Ref out = push(std::move(y), tracked(x), nullptr);
    set_back(out, [this, x, out](const Tensor4<T>& dy) {
      Tensor4<T>* dx = grad_buf(x);
      if (!dx) return;
      const Tensor4<T>& yv = value(out);
      for (std::int64_t i = 0; i < yv.size(); ++i) (*dx)[i] += dy[i] * yv[i];
    });
    return out;
  }

  Ref mean_all(Ref x) {
    const Tensor4<T>& xv = value(x);
    if (xv.size() == 0) throw ValidationError("mean_all: empty tensor");
    T s = 0;
    for (std::int64_t i = 0; i < xv.size(); ++i) s += xv[i];
    const T inv_n = T(1) / static_cast<T>(xv.size());
    Tensor4<T> y = Tensor4<T>::scalar(s * inv_n);
    return push(std::move(y), tracked(x), [this, x, inv_n](const Tensor4<T>& dy) {
      Tensor4<T>* dx = grad_buf(x);
      if (!dx) return;
      const T g = dy[0] * inv_n;
      for (std::int64_t i = 0; i < dx->size(); ++i) (*dx)[i] += g;
    });
  }

  Ref sum_all(Ref x) {
    const Tensor4<T>& xv = value(x);
    T s = 0;
    for (std::int64_t i = 0; i < xv.size(); ++i) s += xv[i];
    Tensor4<T> y = Tensor4<T>::scalar(s);
    return push(std::move(y), tracked(x), [this, x](const Tensor4<T>& dy) {
      Tensor4<T>* dx = grad_buf(x);
      if (!dx) return;
      for (std::int64_t i = 0; i < dx->size(); ++i) (*dx)[i] += dy[0];
    });
  }

  // One channel as (n,1,h,w); backward scatters into that channel.
  Ref slice_channel(Ref x, std::int64_t c) {
    const Tensor4<T>& xv = value(x);
    const auto& d = xv.dims();
    if (c < 0 || c >= d.c)
      throw ValidationError("slice_channel: channel " + std::to_string(c) + " out of range for " +
                            d.to_string());
    Tensor4<T> y({d.n, 1, d.h, d.w});
    const std::int64_t plane = d.h * d.w;
    for (std::int64_t n = 0; n < d.n; ++n)
      std::copy_n(xv.data() + (n * d.c + c) * plane, plane, y.data() + n * plane);
    return push(std::move(y), tracked(x), [this, x, c](const Tensor4<T>& dy) {
      Tensor4<T>* dx = grad_buf(x);
      if (!dx) return;
      const auto& d = dx->dims();
      const std::int64_t plane = d.h * d.w;
      for (std::int64_t n = 0; n < d.n; ++n) {
        T* dst = dx->data() + (n * d.c + c) * plane;
        const T* src = dy.data() + n * plane;
        for (std::int64_t i = 0; i < plane; ++i) dst[i] += src[i];
      }
    });
  }

  Ref avg_pool2(Ref x) {
    Tensor4<T> y = ppkit::avg_pool2(value(x));
    return push(std::move(y), tracked(x), [this, x](const Tensor4<T>& dy) {
      if (Tensor4<T>* dx = grad_buf(x)) avg_pool2_backward(value(x).dims(), dy, dx);
    });
  }

  void backward(Ref loss) {
    Node& ln = nodes_[static_cast<std::size_t>(loss)];
    if (ln.value.size() != 1)
      throw ValidationError("backward: loss must be scalar, got " +
                            ln.value.dims().to_string());
    for (std::size_t i = 0; i <= static_cast<std::size_t>(loss); ++i)
      if (nodes_[i].track) nodes_[i].grad = Tensor4<T>(nodes_[i].value.dims());
    ln.grad[0] = T(1);
    for (std::int64_t i = loss; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.track && n.back) n.back(n.grad);
    }
    ran_backward_ = true;
  }

  bool ran_backward() const { return ran_backward_; }
  std::size_t node_count() const { return nodes_.size(); }

private:
  struct Node {
    Tensor4<T> value;
    Tensor4<T> grad;
    bool track = false;
    std::function<void(const Tensor4<T>&)> back;
  };

  bool tracked(Ref r) const { return nodes_[static_cast<std::size_t>(r)].track; }

  Tensor4<T>* grad_buf(Ref r) {
    Node& n = nodes_[static_cast<std::size_t>(r)];
    return n.track ? &n.grad : nullptr;
  }

  void accumulate(Ref r, const Tensor4<T>& dy, T factor) {
    Tensor4<T>* g = grad_buf(r);
    if (!g) return;
    for (std::int64_t i = 0; i < dy.size(); ++i) (*g)[i] += factor * dy[i];
  }

  template <typename F>
  Ref binary(Ref a, Ref b, F&& op, std::function<void(const Tensor4<T>&)> back) {
    const Tensor4<T>& av = value(a);
    const Tensor4<T>& bv = value(b);
    if (!av.same_shape(bv))
      throw ValidationError("elementwise op: shape mismatch " + av.dims().to_string() +
                            " vs " + bv.dims().to_string());
    Tensor4<T> y(av.dims());
    for (std::int64_t i = 0; i < av.size(); ++i) y[i] = op(av[i], bv[i]);
    const bool t = tracked(a) || tracked(b);
    return push(std::move(y), t, t ? std::move(back) : nullptr);
  }

  Ref broadcast_combine(Ref x, Ref s, T sign) {
    const Tensor4<T>& xv = value(x);
    const Tensor4<T>& sv = value(s);
    if (sv.size() != 1)
      throw ValidationError("broadcast op: second operand must be scalar, got " +
                            sv.dims().to_string());
    Tensor4<T> y(xv.dims());
    const T svv = sv[0];
    for (std::int64_t i = 0; i < xv.size(); ++i) y[i] = xv[i] + sign * svv;
    return push(std::move(y), tracked(x) || tracked(s),
                [this, x, s, sign](const Tensor4<T>& dy) {
                  accumulate(x, dy, T(1));
                  if (Tensor4<T>* ds = grad_buf(s)) {
                    T sum = 0;
                    for (std::int64_t i = 0; i < dy.size(); ++i) sum += dy[i];
                    (*ds)[0] += sign * sum;
                  }
                });
  }

  Ref push(Tensor4<T> v, bool track, std::function<void(const Tensor4<T>&)> back) {
    nodes_.push_back(Node{std::move(v), Tensor4<T>(), track, std::move(back)});
    return static_cast<Ref>(nodes_.size() - 1);
  }

  void set_back(Ref r, std::function<void(const Tensor4<T>&)> back) {
    Node& n = nodes_[static_cast<std::size_t>(r)];
    if (n.track) n.back = std::move(back);
  }

  std::vector<Node> nodes_;
  std::unordered_map<std::string, Ref> param_refs_;
  std::vector<std::string> param_order_;
  bool ran_backward_ = false;
};

}  // namespace ppkit
