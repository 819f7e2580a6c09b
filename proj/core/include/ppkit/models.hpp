#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ppkit/kernels.hpp"
#include "ppkit/params.hpp"
#include "ppkit/random.hpp"
#include "ppkit/tape.hpp"
#include "ppkit/tensor.hpp"

namespace ppkit {

struct GeneratorConfig {
  std::int64_t num_residual_blocks = 16;
  std::int64_t feature_width = 64;
  std::int64_t kernel_size = 3;
  std::int64_t input_block_size = 96;
};

struct DiscriminatorConfig {
  std::int64_t input_size = 96;  // square input, must be divisible by 16
  std::int64_t base_width = 64;
  std::int64_t dense_width = 1024;
  std::int64_t kernel_size = 3;
  double leaky_slope = 0.2;
  double bn_eps = 1e-5;
  double bn_momentum = 0.9;
};

struct ParamSpec {
  std::string name;
  Dims4 dims;
  bool trainable;
};

inline void validate_generator_config(const GeneratorConfig& cfg) {
  if (cfg.num_residual_blocks < 1 || cfg.feature_width < 1)
    throw ValidationError("generator config: sizes must be positive");
  if (cfg.input_block_size < 16)
    throw ValidationError("generator config: input block size must be >= 16");
  if (cfg.kernel_size < 1 || cfg.kernel_size % 2 == 0)
    throw ValidationError("generator config: kernel size must be odd");
}

inline void validate_discriminator_config(const DiscriminatorConfig& cfg) {
  if (cfg.base_width < 1 || cfg.dense_width < 1)
    throw ValidationError("discriminator config: widths must be positive");
  if (cfg.kernel_size < 1 || cfg.kernel_size % 2 == 0)
    throw ValidationError("discriminator config: kernel size must be odd");
  if (cfg.input_size < 16 || cfg.input_size % 16 != 0)
    throw ValidationError("discriminator config: input size must be a positive multiple of 16");
}

// Parameter names, shapes and trainability in serialization order.
inline std::vector<ParamSpec> generator_param_specs(const GeneratorConfig& cfg) {
  validate_generator_config(cfg);
  const std::int64_t w = cfg.feature_width, k = cfg.kernel_size;
  std::vector<ParamSpec> specs;
  specs.push_back({"g.in.conv.w", {w, 3, k, k}, true});
  specs.push_back({"g.in.conv.b", {1, w, 1, 1}, true});
  specs.push_back({"g.in.prelu", {1, w, 1, 1}, true});
  for (std::int64_t i = 0; i < cfg.num_residual_blocks; ++i) {
    const std::string p = "g.rb" + std::to_string(i) + ".";
    specs.push_back({p + "conv1.w", {w, w, k, k}, true});
    specs.push_back({p + "conv1.b", {1, w, 1, 1}, true});
    specs.push_back({p + "prelu", {1, w, 1, 1}, true});
    specs.push_back({p + "conv2.w", {w, w, k, k}, true});
    specs.push_back({p + "conv2.b", {1, w, 1, 1}, true});
  }
  specs.push_back({"g.mid.conv.w", {w, w, k, k}, true});
  specs.push_back({"g.mid.conv.b", {1, w, 1, 1}, true});
  specs.push_back({"g.out.conv.w", {3, w, k, k}, true});
  specs.push_back({"g.out.conv.b", {1, 3, 1, 1}, true});
  return specs;
}

namespace detail {

// Eight conv layers: widths w,w,2w,2w,4w,4w,8w,8w; strides 1,2,1,2,1,2,1,2.
// The first has no batch norm.
inline std::vector<std::int64_t> disc_widths(std::int64_t w) {
  return {w, w, 2 * w, 2 * w, 4 * w, 4 * w, 8 * w, 8 * w};
}
inline std::vector<std::int64_t> disc_strides() { return {1, 2, 1, 2, 1, 2, 1, 2}; }

}  // namespace detail

inline std::vector<ParamSpec> discriminator_param_specs(const DiscriminatorConfig& cfg) {
  validate_discriminator_config(cfg);
  const std::int64_t k = cfg.kernel_size;
  const auto widths = detail::disc_widths(cfg.base_width);
  std::vector<ParamSpec> specs;
  std::int64_t in_c = 3;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::string p = "d.conv" + std::to_string(i) + ".";
    specs.push_back({p + "w", {widths[i], in_c, k, k}, true});
    specs.push_back({p + "b", {1, widths[i], 1, 1}, true});
    if (i > 0) {
      const std::string bn = "d.bn" + std::to_string(i) + ".";
      specs.push_back({bn + "scale", {1, widths[i], 1, 1}, true});
      specs.push_back({bn + "shift", {1, widths[i], 1, 1}, true});
      specs.push_back({bn + "rmean", {1, widths[i], 1, 1}, false});
      specs.push_back({bn + "rvar", {1, widths[i], 1, 1}, false});
    }
    in_c = widths[i];
  }
  const std::int64_t side = cfg.input_size / 16;
  const std::int64_t flat = widths.back() * side * side;
  specs.push_back({"d.dense0.w", {cfg.dense_width, flat, 1, 1}, true});
  specs.push_back({"d.dense0.b", {1, cfg.dense_width, 1, 1}, true});
  specs.push_back({"d.dense1.w", {1, cfg.dense_width, 1, 1}, true});
  specs.push_back({"d.dense1.b", {1, 1, 1, 1}, true});
  return specs;
}

// Weights (.w suffix) draw from N(0, 2/fan_in) with fan_in = product of the
// non-output kernel dims; this covers conv and dense alike. PReLU slopes start
// at 0.25; batch-norm scale and running variance at 1; everything else at 0.
// Draw order equals spec order, so a seed pins the whole parameter vector.
template <typename T>
ParameterSet<T> init_params(const std::vector<ParamSpec>& specs, Rng& rng) {
  ParameterSet<T> out;
  for (const ParamSpec& s : specs) {
    Tensor4<T> t(s.dims);
    const bool is_weight = s.name.size() > 2 && s.name.rfind(".w") == s.name.size() - 2;
    if (is_weight) {
      const double fan_in = static_cast<double>(s.dims.c * s.dims.h * s.dims.w);
      const double stddev = std::sqrt(2.0 / fan_in);
      for (std::int64_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<T>(rng.normal() * stddev);
    } else if (s.name.rfind(".prelu") != std::string::npos) {
      for (std::int64_t i = 0; i < t.size(); ++i) t[i] = T(0.25);
    } else if (s.name.rfind(".scale") != std::string::npos ||
               s.name.rfind(".rvar") != std::string::npos) {
      for (std::int64_t i = 0; i < t.size(); ++i) t[i] = T(1);
    }
    out.add(s.name, std::move(t), s.trainable);
  }
  return out;
}

template <typename T>
ParameterSet<T> init_params(const std::vector<ParamSpec>& specs, std::uint64_t seed) {
  Rng rng(seed);
  return init_params<T>(specs, rng);
}

template <typename T>
ParameterSet<T> generator_init(const GeneratorConfig& cfg, std::uint64_t seed) {
  return init_params<T>(generator_param_specs(cfg), seed);
}

template <typename T>
ParameterSet<T> discriminator_init(const DiscriminatorConfig& cfg, std::uint64_t seed) {
  return init_params<T>(discriminator_param_specs(cfg), seed);
}

// Checks that `params` holds exactly the parameters the config implies.
template <typename T>
void validate_params(const std::vector<ParamSpec>& specs, const ParameterSet<T>& params) {
  if (params.size() != specs.size())
    throw ValidationError("model parameters: expected " + std::to_string(specs.size()) +
                          " tensors, got " + std::to_string(params.size()));
  for (const ParamSpec& s : specs) {
    if (!params.contains(s.name))
      throw ValidationError("model parameters: missing " + s.name);
    if (params.at(s.name).dims() != s.dims)
      throw ValidationError("model parameters: " + s.name + " has dims " +
                            params.at(s.name).dims().to_string() + ", expected " +
                            s.dims.to_string());
  }
}

namespace detail {

template <typename T>
void add_inplace(Tensor4<T>& a, const Tensor4<T>& b) {
  if (!a.same_shape(b))
    throw ValidationError("skip add: shape mismatch " + a.dims().to_string() + " vs " +
                          b.dims().to_string());
  for (std::int64_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

// Binds parameter-set entries to tape nodes, one node per name no matter how
// often the model is replayed on the tape. Trainable entries become gradient
// leaves; with trainable=false the whole model is a constant function.
template <typename T>
class TapeBinder {
public:
  TapeBinder(Tape<T>& tape, const ParameterSet<T>& params, bool trainable)
      : tape_(tape), params_(params), trainable_(trainable) {}

  typename Tape<T>::Ref operator()(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    typename Tape<T>::Ref r;
    if (trainable_ && params_.trainable(name)) {
      r = tape_.has_parameter(name) ? tape_.parameter_ref(name)
                                    : tape_.parameter(name, params_.at(name));
    } else {
      r = tape_.constant(params_.at(name));
    }
    cache_.emplace(name, r);
    return r;
  }

private:
  Tape<T>& tape_;
  const ParameterSet<T>& params_;
  bool trainable_;
  std::unordered_map<std::string, typename Tape<T>::Ref> cache_;
};

}  // namespace detail

// ---- generator ----
//
// x0 = PReLU(conv_in(x)); RBs compute y = x + conv2(PReLU(conv1(x)));
// z = conv_mid(x_N) + x0; output = Tanh(conv_out(z) + x). The final skip takes
// the 3-channel network input so the stack learns a residual enhancement.

template <typename T>
Tensor4<T> generator_forward(const GeneratorConfig& cfg, const ParameterSet<T>& params,
                             const Tensor4<T>& x) {
  if (x.dims().c != 3)
    throw ValidationError("generator: input must have 3 channels, got " +
                          x.dims().to_string());
  Tensor4<T> x0 = prelu(conv2d(x, params.at("g.in.conv.w"), params.at("g.in.conv.b"), 1,
                               Padding::kSame),
                        params.at("g.in.prelu"));
  Tensor4<T> h = x0;
  for (std::int64_t i = 0; i < cfg.num_residual_blocks; ++i) {
    const std::string p = "g.rb" + std::to_string(i) + ".";
    Tensor4<T> t = conv2d(h, params.at(p + "conv1.w"), params.at(p + "conv1.b"), 1,
                          Padding::kSame);
    t = prelu(t, params.at(p + "prelu"));
    t = conv2d(t, params.at(p + "conv2.w"), params.at(p + "conv2.b"), 1, Padding::kSame);
    detail::add_inplace(t, h);
    h = std::move(t);
  }
  Tensor4<T> z = conv2d(h, params.at("g.mid.conv.w"), params.at("g.mid.conv.b"), 1,
                        Padding::kSame);
  detail::add_inplace(z, x0);
  Tensor4<T> r = conv2d(z, params.at("g.out.conv.w"), params.at("g.out.conv.b"), 1,
                        Padding::kSame);
  detail::add_inplace(r, x);
  return tanh_t(r);
}

template <typename T>
typename Tape<T>::Ref generator_forward_tape(Tape<T>& tape, const GeneratorConfig& cfg,
                                             const ParameterSet<T>& params,
                                             typename Tape<T>::Ref x,
                                             bool trainable = true) {
  using Ref = typename Tape<T>::Ref;
  if (tape.value(x).dims().c != 3)
    throw ValidationError("generator: input must have 3 channels, got " +
                          tape.value(x).dims().to_string());
  detail::TapeBinder<T> bind(tape, params, trainable);
  Ref x0 = tape.prelu(tape.conv2d(x, bind("g.in.conv.w"), bind("g.in.conv.b"), 1,
                                  Padding::kSame),
                      bind("g.in.prelu"));
  Ref h = x0;
  for (std::int64_t i = 0; i < cfg.num_residual_blocks; ++i) {
    const std::string p = "g.rb" + std::to_string(i) + ".";
    Ref t = tape.conv2d(h, bind(p + "conv1.w"), bind(p + "conv1.b"), 1, Padding::kSame);
    t = tape.prelu(t, bind(p + "prelu"));
    t = tape.conv2d(t, bind(p + "conv2.w"), bind(p + "conv2.b"), 1, Padding::kSame);
    h = tape.add(h, t);
  }
  Ref z = tape.conv2d(h, bind("g.mid.conv.w"), bind("g.mid.conv.b"), 1, Padding::kSame);
  z = tape.add(z, x0);
  Ref r = tape.conv2d(z, bind("g.out.conv.w"), bind("g.out.conv.b"), 1, Padding::kSame);
  r = tape.add(r, x);
  return tape.tanh(r);
}

// ---- discriminator ----
//
// conv0 + LeakyReLU (no BN), then 7 conv+BN+LeakyReLU layers, then
// dense+LeakyReLU and a final dense to one raw score per batch item.

inline void check_discriminator_input(const DiscriminatorConfig& cfg, const Dims4& d) {
  if (d.c != 3 || d.h != cfg.input_size || d.w != cfg.input_size)
    throw ValidationError("discriminator: input must be 3x" + std::to_string(cfg.input_size) +
                          "x" + std::to_string(cfg.input_size) + ", got " + d.to_string());
}

// Train mode uses batch statistics; running stats in `params` are updated only
// when update_running_stats is set (the discriminator's own training step).
template <typename T>
Tensor4<T> discriminator_forward(const DiscriminatorConfig& cfg, ParameterSet<T>& params,
                                 const Tensor4<T>& x, bool train,
                                 bool update_running_stats = false) {
  check_discriminator_input(cfg, x.dims());
  const auto strides = detail::disc_strides();
  const T slope = static_cast<T>(cfg.leaky_slope);
  Tensor4<T> h = x;
  for (std::size_t i = 0; i < strides.size(); ++i) {
    const std::string p = "d.conv" + std::to_string(i) + ".";
    h = conv2d(h, params.at(p + "w"), params.at(p + "b"), strides[i], Padding::kSame);
    if (i > 0) {
      const std::string bn = "d.bn" + std::to_string(i) + ".";
      Tensor4<T> new_rm(params.at(bn + "rmean").dims());
      Tensor4<T> new_rv(params.at(bn + "rvar").dims());
      h = batch_norm(h, params.at(bn + "scale"), params.at(bn + "shift"),
                     params.at(bn + "rmean"), params.at(bn + "rvar"), train,
                     static_cast<T>(cfg.bn_eps), static_cast<T>(cfg.bn_momentum),
                     static_cast<BatchNormCache<T>*>(nullptr), train ? &new_rm : nullptr,
                     train ? &new_rv : nullptr);
      if (train && update_running_stats) {
        params.at(bn + "rmean") = std::move(new_rm);
        params.at(bn + "rvar") = std::move(new_rv);
      }
    }
    h = leaky_relu(h, slope);
  }
  h = leaky_relu(dense(h, params.at("d.dense0.w"), params.at("d.dense0.b")), slope);
  return dense(h, params.at("d.dense1.w"), params.at("d.dense1.b"));
}

template <typename T>
typename Tape<T>::Ref discriminator_forward_tape(Tape<T>& tape, const DiscriminatorConfig& cfg,
                                                 ParameterSet<T>& params,
                                                 typename Tape<T>::Ref x, bool train,
                                                 bool trainable = true,
                                                 bool update_running_stats = false) {
  using Ref = typename Tape<T>::Ref;
  check_discriminator_input(cfg, tape.value(x).dims());
  const auto strides = detail::disc_strides();
  const T slope = static_cast<T>(cfg.leaky_slope);
  detail::TapeBinder<T> bind(tape, params, trainable);
  Ref h = x;
  for (std::size_t i = 0; i < strides.size(); ++i) {
    const std::string p = "d.conv" + std::to_string(i) + ".";
    h = tape.conv2d(h, bind(p + "w"), bind(p + "b"), strides[i], Padding::kSame);
    if (i > 0) {
      const std::string bn = "d.bn" + std::to_string(i) + ".";
      Tensor4<T> new_rm(params.at(bn + "rmean").dims());
      Tensor4<T> new_rv(params.at(bn + "rvar").dims());
      h = tape.batch_norm(h, bind(bn + "scale"), bind(bn + "shift"), params.at(bn + "rmean"),
                          params.at(bn + "rvar"), train, static_cast<T>(cfg.bn_eps),
                          static_cast<T>(cfg.bn_momentum), train ? &new_rm : nullptr,
                          train ? &new_rv : nullptr);
      if (train && update_running_stats) {
        params.at(bn + "rmean") = std::move(new_rm);
        params.at(bn + "rvar") = std::move(new_rv);
      }
    }
    h = tape.leaky_relu(h, slope);
  }
  h = tape.leaky_relu(tape.dense(h, bind("d.dense0.w"), bind("d.dense0.b")), slope);
  return tape.dense(h, bind("d.dense1.w"), bind("d.dense1.b"));
}

}  // namespace ppkit
