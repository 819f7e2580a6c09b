#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>

#include "ppkit/params.hpp"
#include "ppkit/tensor.hpp"

namespace ppkit {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. First and second moments live per parameter name;
// the step counter is shared (all parameters update together each step).
template <typename T>
class Adam {
public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Applies one update to every trainable parameter. `grads` must contain an
  // entry per trainable name (zeros are fine for unused parameters).
  void step(ParameterSet<T>& params,
            const std::unordered_map<std::string, Tensor4<T>>& grads, T lr) {
    ++t_;
    const T c1 = T(1) - static_cast<T>(std::pow(cfg_.beta1, static_cast<double>(t_)));
    const T c2 = T(1) - static_cast<T>(std::pow(cfg_.beta2, static_cast<double>(t_)));
    const T b1 = static_cast<T>(cfg_.beta1);
    const T b2 = static_cast<T>(cfg_.beta2);
    const T eps = static_cast<T>(cfg_.eps);
    for (const std::string& name : params.names()) {
      if (!params.trainable(name)) continue;
      auto git = grads.find(name);
      if (git == grads.end()) throw ValidationError("adam: missing gradient for " + name);
      Tensor4<T>& p = params.at(name);
      const Tensor4<T>& g = git->second;
      if (!p.same_shape(g))
        throw ValidationError("adam: gradient shape mismatch for " + name);
      Moments& mo = slot(name, p.dims());
      for (std::int64_t i = 0; i < p.size(); ++i) {
        mo.m[i] = b1 * mo.m[i] + (T(1) - b1) * g[i];
        mo.v[i] = b2 * mo.v[i] + (T(1) - b2) * g[i] * g[i];
        const T mhat = mo.m[i] / c1;
        const T vhat = mo.v[i] / c2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  std::int64_t step_count() const { return t_; }

  // Checkpoint plumbing: moments are exposed in the order first seen.
  const std::vector<std::string>& slot_names() const { return order_; }
  bool has_slot(const std::string& name) const { return moments_.count(name) != 0; }
  const Tensor4<T>& first_moment(const std::string& name) const { return moments_.at(name).m; }
  const Tensor4<T>& second_moment(const std::string& name) const { return moments_.at(name).v; }

  void restore_slot(const std::string& name, Tensor4<T> m, Tensor4<T> v) {
    if (!moments_.count(name)) order_.push_back(name);
    moments_[name] = Moments{std::move(m), std::move(v)};
  }
  void restore_step_count(std::int64_t t) { t_ = t; }

private:
  struct Moments {
    Tensor4<T> m;
    Tensor4<T> v;
  };

  Moments& slot(const std::string& name, const Dims4& dims) {
    auto it = moments_.find(name);
    if (it == moments_.end()) {
      order_.push_back(name);
      it = moments_.emplace(name, Moments{Tensor4<T>(dims), Tensor4<T>(dims)}).first;
    }
    return it->second;
  }

  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::unordered_map<std::string, Moments> moments_;
  std::vector<std::string> order_;
};

}  // namespace ppkit
