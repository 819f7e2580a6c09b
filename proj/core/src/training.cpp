#include "ppkit/training.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "ppkit/bytes.hpp"
#include "ppkit/tape.hpp"

namespace ppkit {
namespace {

constexpr char kMagic[4] = {'P', 'P', 'K', 'C'};

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError("train config: " + msg);
}

std::vector<std::int64_t> shuffled_indices(std::int64_t n, Rng& rng) {
  std::vector<std::int64_t> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), std::int64_t{0});
  for (std::int64_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
  }
  return v;
}

// All mini-batches of one epoch, in permutation order; the last one may be
// short.
std::vector<std::vector<std::int64_t>> make_batches(const std::vector<std::int64_t>& perm,
                                                    std::int64_t batch_size) {
  std::vector<std::vector<std::int64_t>> out;
  for (std::size_t i = 0; i < perm.size(); i += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(perm.size(), i + static_cast<std::size_t>(batch_size));
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(i),
                     perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

std::unordered_map<std::string, Tensor4f> collect_grads(const Tape<float>& tape,
                                                        const ParameterSetF& params) {
  std::unordered_map<std::string, Tensor4f> g;
  for (const std::string& name : params.names())
    if (params.trainable(name)) g.emplace(name, tape.parameter_grad(name));
  return g;
}

void write_i64(ByteWriter& w, std::int64_t v) { w.u64(static_cast<std::uint64_t>(v)); }
std::int64_t read_i64(ByteReader& r) { return static_cast<std::int64_t>(r.u64()); }

void write_config(ByteWriter& w, const TrainConfig& c) {
  w.f64(c.learning_rate);
  w.f64(c.lr_decay);
  write_i64(w, c.lr_step_epochs);
  write_i64(w, c.epochs);
  w.f64(c.beta1);
  w.f64(c.beta2);
  write_i64(w, c.batch_size);
  w.u64(c.seed);
  w.str(c.method);
  w.f64(c.weights.alpha);
  w.f64(c.weights.beta);
  write_i64(w, c.ssim.window);
  w.f64(c.ssim.sigma);
  w.f64(c.ssim.k1);
  w.f64(c.ssim.k2);
  w.f64(c.ssim.dynamic_range);
  w.u32(static_cast<std::uint32_t>(c.ssim.scale_weights.size()));
  for (double sw : c.ssim.scale_weights) w.f64(sw);
  write_i64(w, c.generator.num_residual_blocks);
  write_i64(w, c.generator.feature_width);
  write_i64(w, c.generator.kernel_size);
  write_i64(w, c.generator.input_block_size);
  write_i64(w, c.discriminator.input_size);
  write_i64(w, c.discriminator.base_width);
  write_i64(w, c.discriminator.dense_width);
  write_i64(w, c.discriminator.kernel_size);
  w.f64(c.discriminator.leaky_slope);
  w.f64(c.discriminator.bn_eps);
  w.f64(c.discriminator.bn_momentum);
  write_i64(w, c.stage1_epochs);
}

TrainConfig read_config(ByteReader& r) {
  TrainConfig c;
  c.learning_rate = r.f64();
  c.lr_decay = r.f64();
  c.lr_step_epochs = read_i64(r);
  c.epochs = read_i64(r);
  c.beta1 = r.f64();
  c.beta2 = r.f64();
  c.batch_size = read_i64(r);
  c.seed = r.u64();
  c.method = r.str();
  c.weights.alpha = r.f64();
  c.weights.beta = r.f64();
  c.ssim.window = read_i64(r);
  c.ssim.sigma = r.f64();
  c.ssim.k1 = r.f64();
  c.ssim.k2 = r.f64();
  c.ssim.dynamic_range = r.f64();
  c.ssim.scale_weights.resize(r.u32());
  for (double& sw : c.ssim.scale_weights) sw = r.f64();
  c.generator.num_residual_blocks = read_i64(r);
  c.generator.feature_width = read_i64(r);
  c.generator.kernel_size = read_i64(r);
  c.generator.input_block_size = read_i64(r);
  c.discriminator.input_size = read_i64(r);
  c.discriminator.base_width = read_i64(r);
  c.discriminator.dense_width = read_i64(r);
  c.discriminator.kernel_size = read_i64(r);
  c.discriminator.leaky_slope = r.f64();
  c.discriminator.bn_eps = r.f64();
  c.discriminator.bn_momentum = r.f64();
  c.stage1_epochs = read_i64(r);
  return c;
}

// checkpoint_path is deliberately excluded: a resumed run may write its
// checkpoints somewhere else without breaking reproducibility.
void require_same_config(const TrainConfig& ck, const TrainConfig& now) {
  std::vector<std::string> bad;
  auto chk = [&](bool same, const char* field) {
    if (!same) bad.emplace_back(field);
  };
  chk(ck.learning_rate == now.learning_rate, "learning_rate");
  chk(ck.lr_decay == now.lr_decay, "lr_decay");
  chk(ck.lr_step_epochs == now.lr_step_epochs, "lr_step_epochs");
  chk(ck.epochs == now.epochs, "epochs");
  chk(ck.beta1 == now.beta1, "beta1");
  chk(ck.beta2 == now.beta2, "beta2");
  chk(ck.batch_size == now.batch_size, "batch_size");
  chk(ck.seed == now.seed, "seed");
  chk(ck.method == now.method, "method");
  chk(ck.weights.alpha == now.weights.alpha, "weights.alpha");
  chk(ck.weights.beta == now.weights.beta, "weights.beta");
  chk(ck.ssim.window == now.ssim.window, "ssim.window");
  chk(ck.ssim.sigma == now.ssim.sigma, "ssim.sigma");
  chk(ck.ssim.k1 == now.ssim.k1, "ssim.k1");
  chk(ck.ssim.k2 == now.ssim.k2, "ssim.k2");
  chk(ck.ssim.dynamic_range == now.ssim.dynamic_range, "ssim.dynamic_range");
  chk(ck.ssim.scale_weights == now.ssim.scale_weights, "ssim.scale_weights");
  chk(ck.generator.num_residual_blocks == now.generator.num_residual_blocks,
      "generator.num_residual_blocks");
  chk(ck.generator.feature_width == now.generator.feature_width, "generator.feature_width");
  chk(ck.generator.kernel_size == now.generator.kernel_size, "generator.kernel_size");
  chk(ck.generator.input_block_size == now.generator.input_block_size,
      "generator.input_block_size");
  chk(ck.discriminator.input_size == now.discriminator.input_size, "discriminator.input_size");
  chk(ck.discriminator.base_width == now.discriminator.base_width, "discriminator.base_width");
  chk(ck.discriminator.dense_width == now.discriminator.dense_width,
      "discriminator.dense_width");
  chk(ck.discriminator.kernel_size == now.discriminator.kernel_size,
      "discriminator.kernel_size");
  chk(ck.discriminator.leaky_slope == now.discriminator.leaky_slope,
      "discriminator.leaky_slope");
  chk(ck.discriminator.bn_eps == now.discriminator.bn_eps, "discriminator.bn_eps");
  chk(ck.discriminator.bn_momentum == now.discriminator.bn_momentum,
      "discriminator.bn_momentum");
  chk(ck.stage1_epochs == now.stage1_epochs, "stage1_epochs");
  if (!bad.empty()) {
    std::string msg = "checkpoint config does not match the current run:";
    for (const std::string& f : bad) msg += " " + f;
    throw ValidationError(msg);
  }
}

void write_param_values(ByteWriter& w, const std::vector<ParamSpec>& specs,
                        const ParameterSetF& params) {
  for (const ParamSpec& s : specs) {
    const Tensor4f& t = params.at(s.name);
    for (std::int64_t i = 0; i < t.size(); ++i) w.f32(t[i]);
  }
}

ParameterSetF read_param_values(ByteReader& r, const std::vector<ParamSpec>& specs) {
  ParameterSetF out;
  for (const ParamSpec& s : specs) {
    Tensor4f t(s.dims);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = r.f32();
    out.add(s.name, std::move(t), s.trainable);
  }
  return out;
}

// Adam moments serialize per trainable spec name in spec order; names the
// optimizer has not touched yet round-trip as zero moments, which behaves
// identically to a fresh slot.
void write_adam(ByteWriter& w, const Adam<float>& adam, const std::vector<ParamSpec>& specs) {
  write_i64(w, adam.step_count());
  for (const ParamSpec& s : specs) {
    if (!s.trainable) continue;
    if (adam.has_slot(s.name)) {
      const Tensor4f& m = adam.first_moment(s.name);
      const Tensor4f& v = adam.second_moment(s.name);
      for (std::int64_t i = 0; i < m.size(); ++i) w.f32(m[i]);
      for (std::int64_t i = 0; i < v.size(); ++i) w.f32(v[i]);
    } else {
      const std::int64_t n = s.dims.count();
      for (std::int64_t i = 0; i < 2 * n; ++i) w.f32(0.0f);
    }
  }
}

Adam<float> read_adam(ByteReader& r, const std::vector<ParamSpec>& specs,
                      const AdamConfig& cfg) {
  Adam<float> adam(cfg);
  const std::int64_t t = read_i64(r);
  for (const ParamSpec& s : specs) {
    if (!s.trainable) continue;
    Tensor4f m(s.dims), v(s.dims);
    for (std::int64_t i = 0; i < m.size(); ++i) m[i] = r.f32();
    for (std::int64_t i = 0; i < v.size(); ++i) v[i] = r.f32();
    adam.restore_slot(s.name, std::move(m), std::move(v));
  }
  adam.restore_step_count(t);
  return adam;
}

}  // namespace

void validate_train_config(const TrainConfig& c) {
  require(std::isfinite(c.learning_rate) && c.learning_rate > 0,
          "learning rate must be positive");
  require(std::isfinite(c.lr_decay) && c.lr_decay > 0 && c.lr_decay <= 1,
          "lr decay must be in (0, 1]");
  require(c.lr_step_epochs >= 1, "lr step must be at least one epoch");
  require(c.epochs >= 1, "epoch count must be positive");
  require(c.beta1 >= 0 && c.beta1 < 1 && c.beta2 >= 0 && c.beta2 < 1,
          "adam betas must lie in [0, 1)");
  require(c.batch_size >= 1, "batch size must be positive");
  require(c.method == "l1" || c.method == "perceptual",
          "method must be l1 or perceptual, got '" + c.method + "'");
  require(c.weights.alpha >= 0 && c.weights.beta >= 0, "loss weights must be non-negative");
  validate_generator_config(c.generator);
  if (c.method == "perceptual") {
    validate_discriminator_config(c.discriminator);
    require(c.discriminator.input_size == c.generator.input_block_size,
            "discriminator input size must equal the generator block size");
    require(c.stage1_epochs == -1 || (c.stage1_epochs >= 0 && c.stage1_epochs <= c.epochs),
            "stage-1 epochs must be -1 or in [0, epochs]");
    require(c.ssim.window >= 1 && c.ssim.window % 2 == 1, "ssim window must be odd");
    require(!c.ssim.scale_weights.empty(), "ssim scale weights must be non-empty");
  }
}

double lr_at_epoch(const TrainConfig& c, std::int64_t epoch) {
  if (epoch < 0 || epoch >= c.epochs)
    throw ValidationError("lr schedule: epoch " + std::to_string(epoch) +
                          " outside [0, " + std::to_string(c.epochs) + ")");
  const auto k = static_cast<double>(epoch / c.lr_step_epochs);
  return c.learning_rate * std::pow(c.lr_decay, k);
}

std::int64_t resolve_stage1_epochs(const TrainConfig& c) {
  return c.stage1_epochs < 0 ? c.epochs / 2 : c.stage1_epochs;
}

std::string train_log_header() { return "epoch,step,loss_total,loss_ssim,loss_l1,loss_adv,lr"; }

std::string format_train_log_row(const TrainLogRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld,%lld,%.9g,%.9g,%.9g,%.9g,%.9g",
                static_cast<long long>(r.epoch), static_cast<long long>(r.step), r.loss_total,
                r.loss_ssim, r.loss_l1, r.loss_adv, r.lr);
  return buf;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  validate_train_config(ck.config);
  if (ck.stage != 1 && ck.stage != 2)
    throw ValidationError("checkpoint: stage must be 1 or 2");
  if (ck.next_epoch < 0 || ck.next_epoch > ck.config.epochs)
    throw ValidationError("checkpoint: next epoch out of range");
  const auto gspecs = generator_param_specs(ck.config.generator);
  validate_params(gspecs, ck.gen_params);
  if (ck.stage == 2 && !ck.has_discriminator)
    throw ValidationError("checkpoint: adversarial stage requires discriminator state");

  ByteWriter w;
  w.raw(kMagic, 4);
  w.u16(kCheckpointFormatVersion);
  write_config(w, ck.config);
  w.u8(static_cast<std::uint8_t>(ck.stage));
  write_i64(w, ck.next_epoch);
  write_i64(w, ck.global_step);
  w.f64(ck.last_epoch_mean_loss);
  w.str(ck.rng_state);
  write_param_values(w, gspecs, ck.gen_params);
  write_adam(w, ck.adam_g, gspecs);
  w.u8(ck.has_discriminator ? 1 : 0);
  if (ck.has_discriminator) {
    const auto dspecs = discriminator_param_specs(ck.config.discriminator);
    validate_params(dspecs, ck.disc_params);
    write_param_values(w, dspecs, ck.disc_params);
    write_adam(w, ck.adam_d, dspecs);
  }
  w.u64(w.checksum());
  w.write_file(path);
}

Checkpoint load_checkpoint(const std::string& path) {
  ByteReader r = ByteReader::from_file(path);
  if (r.size() < 4 || std::memcmp(r.take(4), kMagic, 4) != 0)
    throw FormatError(path + ": not a checkpoint file (bad magic)");
  if (r.size() < 4 + 2 + 8) throw FormatError("truncated file: " + path);
  {
    ByteReader whole = ByteReader::from_file(path);
    const std::size_t body = whole.size() - 8;
    const std::uint64_t computed = fnv1a64(whole.take(body), body);
    const std::uint64_t trailer = whole.u64();
    if (computed != trailer)
      throw FormatError(path + ": checksum mismatch (file corrupted)");
  }
  const std::uint16_t version = r.u16();
  if (version != kCheckpointFormatVersion)
    throw FormatError(path + ": unsupported checkpoint format version " +
                      std::to_string(version));

  Checkpoint ck;
  ck.config = read_config(r);
  validate_train_config(ck.config);
  ck.stage = r.u8();
  if (ck.stage != 1 && ck.stage != 2)
    throw FormatError(path + ": bad stage " + std::to_string(ck.stage));
  ck.next_epoch = read_i64(r);
  if (ck.next_epoch < 0 || ck.next_epoch > ck.config.epochs)
    throw FormatError(path + ": next epoch out of range");
  ck.global_step = read_i64(r);
  ck.last_epoch_mean_loss = r.f64();
  ck.rng_state = r.str();
  const AdamConfig acfg{ck.config.beta1, ck.config.beta2, 1e-8};
  const auto gspecs = generator_param_specs(ck.config.generator);
  ck.gen_params = read_param_values(r, gspecs);
  ck.adam_g = read_adam(r, gspecs, acfg);
  ck.has_discriminator = r.u8() != 0;
  if (ck.stage == 2 && !ck.has_discriminator)
    throw FormatError(path + ": adversarial stage without discriminator state");
  if (ck.has_discriminator) {
    const auto dspecs = discriminator_param_specs(ck.config.discriminator);
    ck.disc_params = read_param_values(r, dspecs);
    ck.adam_d = read_adam(r, dspecs, acfg);
  }
  if (r.remaining() != 8)
    throw FormatError(path + ": unexpected trailing data (" +
                      std::to_string(r.remaining() - 8) + " extra bytes)");
  return ck;
}

namespace {

// Shared driver for both methods. The l1 run is a single stage; the
// perceptual run switches to the adversarial stage at stage1_epochs.
ModelBundle run_training(const BlockPairDataset& data, const TrainConfig& config,
                         const TrainHook& hook, const std::string& resume_checkpoint,
                         bool perceptual) {
  validate_train_config(config);
  if (data.size() == 0) throw ValidationError("training: dataset is empty");
  if (data.block_size() != config.generator.input_block_size)
    throw ValidationError("training: dataset block size " + std::to_string(data.block_size()) +
                          " does not match generator block size " +
                          std::to_string(config.generator.input_block_size));

  const std::int64_t stage1 = perceptual ? resolve_stage1_epochs(config) : config.epochs;
  const AdamConfig acfg{config.beta1, config.beta2, 1e-8};

  Rng rng(config.seed);
  ParameterSetF params_g;
  ParameterSetF params_d;
  Adam<float> adam_g(acfg);
  Adam<float> adam_d(acfg);
  int stage = 1;
  std::int64_t start_epoch = 0;
  std::int64_t global_step = 0;
  double last_mean_loss = 0;

  if (!resume_checkpoint.empty()) {
    Checkpoint ck = load_checkpoint(resume_checkpoint);
    require_same_config(ck.config, config);
    stage = ck.stage;
    start_epoch = ck.next_epoch;
    global_step = ck.global_step;
    last_mean_loss = ck.last_epoch_mean_loss;
    rng.restore_state(ck.rng_state);
    params_g = std::move(ck.gen_params);
    adam_g = std::move(ck.adam_g);
    if (ck.has_discriminator) {
      params_d = std::move(ck.disc_params);
      adam_d = std::move(ck.adam_d);
    }
  } else {
    params_g = init_params<float>(generator_param_specs(config.generator), rng);
  }

  for (std::int64_t epoch = start_epoch; epoch < config.epochs; ++epoch) {
    if (perceptual && stage == 1 && epoch >= stage1) {
      // Adversarial stage: fresh discriminator, fresh optimizer state for both
      // networks. The discriminator draws from the same RNG stream, so a seed
      // still pins the whole run.
      params_d = init_params<float>(discriminator_param_specs(config.discriminator), rng);
      adam_g = Adam<float>(acfg);
      adam_d = Adam<float>(acfg);
      stage = 2;
    }
    const double lr = lr_at_epoch(config, epoch);
    const float lr_f = static_cast<float>(lr);
    const auto batches = make_batches(shuffled_indices(data.size(), rng), config.batch_size);

    double loss_sum = 0;
    std::int64_t steps_this_epoch = 0;
    for (const auto& batch : batches) {
      Tensor4f comp, orig;
      data.fetch(batch, &comp, &orig);
      TrainLogRow row;
      row.epoch = epoch;
      row.lr = lr;

      if (stage == 1 && !perceptual) {
        Tape<float> tape;
        auto x = tape.constant(std::move(comp));
        auto t = tape.constant(std::move(orig));
        auto out = generator_forward_tape(tape, config.generator, params_g, x);
        auto loss = l1_loss_tape(tape, out, t);
        tape.backward(loss);
        adam_g.step(params_g, collect_grads(tape, params_g), lr_f);
        row.loss_l1 = tape.value(loss).item();
        row.loss_total = row.loss_l1;
      } else if (stage == 1) {
        Tape<float> tape;
        auto x = tape.constant(std::move(comp));
        auto t = tape.constant(std::move(orig));
        auto out = generator_forward_tape(tape, config.generator, params_g, x);
        auto loss = tape.affine(ms_ssim_tape(tape, out, t, config.ssim), -1.0f, 1.0f);
        tape.backward(loss);
        adam_g.step(params_g, collect_grads(tape, params_g), lr_f);
        row.loss_ssim = tape.value(loss).item();
        row.loss_total = row.loss_ssim;
      } else {
        // Discriminator update first, then the generator, every iteration.
        Tensor4f fake = generator_forward(config.generator, params_g, comp);
        {
          Tape<float> tape;
          auto xr = tape.constant(orig);
          auto xf = tape.constant(std::move(fake));
          auto sr = discriminator_forward_tape(tape, config.discriminator, params_d, xr,
                                               /*train=*/true, /*trainable=*/true,
                                               /*update_running_stats=*/true);
          auto sf = discriminator_forward_tape(tape, config.discriminator, params_d, xf, true,
                                               true, true);
          auto loss_d = ragan_discriminator_loss_tape(tape, sr, sf);
          tape.backward(loss_d);
          adam_d.step(params_d, collect_grads(tape, params_d), lr_f);
        }
        {
          Tape<float> tape;
          auto x = tape.constant(std::move(comp));
          auto t = tape.constant(std::move(orig));
          auto out = generator_forward_tape(tape, config.generator, params_g, x);
          // Discriminator weights enter as constants here: gradients flow
          // through its ops into the generator but never touch its parameters.
          auto sr = discriminator_forward_tape(tape, config.discriminator, params_d, t,
                                               /*train=*/true, /*trainable=*/false,
                                               /*update_running_stats=*/false);
          auto sf = discriminator_forward_tape(tape, config.discriminator, params_d, out, true,
                                               false, false);
          auto parts = combined_generator_loss_parts(tape, out, t, sr, sf, config.weights,
                                                     config.ssim);
          tape.backward(parts.total);
          adam_g.step(params_g, collect_grads(tape, params_g), lr_f);
          row.loss_total = tape.value(parts.total).item();
          row.loss_ssim = tape.value(parts.ssim_loss).item();
          row.loss_l1 = tape.value(parts.l1).item();
          row.loss_adv = tape.value(parts.adv).item();
        }
      }

      ++global_step;
      row.step = global_step;
      loss_sum += row.loss_total;
      ++steps_this_epoch;
      if (hook) hook(row);
    }
    last_mean_loss = loss_sum / static_cast<double>(steps_this_epoch);

    if (!config.checkpoint_path.empty()) {
      Checkpoint ck;
      ck.config = config;
      ck.stage = stage;
      ck.next_epoch = epoch + 1;
      ck.global_step = global_step;
      ck.last_epoch_mean_loss = last_mean_loss;
      ck.rng_state = rng.save_state();
      ck.gen_params = params_g;
      ck.adam_g = adam_g;
      ck.has_discriminator = stage == 2;
      if (ck.has_discriminator) {
        ck.disc_params = params_d;
        ck.adam_d = adam_d;
      }
      save_checkpoint(ck, config.checkpoint_path);
    }
  }

  ModelBundle bundle;
  bundle.codec = data.meta().codec;
  bundle.qp_group = data.meta().qp_group;
  bundle.method = perceptual ? "perceptual" : "l1";
  bundle.gen_config = config.generator;
  bundle.gen_params = std::move(params_g);
  bundle.has_discriminator = perceptual && stage == 2;
  if (bundle.has_discriminator) {
    bundle.disc_config = config.discriminator;
    bundle.disc_params = std::move(params_d);
  }
  return bundle;
}

}  // namespace

ModelBundle train_l1(const BlockPairDataset& data, const TrainConfig& config,
                     const TrainHook& hook, const std::string& resume_checkpoint) {
  if (config.method != "l1")
    throw ValidationError("train_l1 called with method '" + config.method + "'");
  return run_training(data, config, hook, resume_checkpoint, false);
}

ModelBundle train_perceptual(const BlockPairDataset& data, const TrainConfig& config,
                             const TrainHook& hook, const std::string& resume_checkpoint) {
  if (config.method != "perceptual")
    throw ValidationError("train_perceptual called with method '" + config.method + "'");
  return run_training(data, config, hook, resume_checkpoint, true);
}

ModelBundle train(const BlockPairDataset& data, const TrainConfig& config,
                  const TrainHook& hook, const std::string& resume_checkpoint) {
  validate_train_config(config);
  return config.method == "l1" ? train_l1(data, config, hook, resume_checkpoint)
                               : train_perceptual(data, config, hook, resume_checkpoint);
}

}  // namespace ppkit
