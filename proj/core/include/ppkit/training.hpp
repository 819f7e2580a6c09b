#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "ppkit/adam.hpp"
#include "ppkit/dataset.hpp"
#include "ppkit/losses.hpp"
#include "ppkit/model_io.hpp"
#include "ppkit/models.hpp"
#include "ppkit/random.hpp"

namespace ppkit {

inline constexpr std::uint16_t kCheckpointFormatVersion = 1;

struct TrainConfig {
  double learning_rate = 1e-4;
  double lr_decay = 0.1;
  std::int64_t lr_step_epochs = 100;
  std::int64_t epochs = 200;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::int64_t batch_size = 16;
  std::uint64_t seed = 0;
  std::string method = "l1";  // "l1" or "perceptual"
  LossWeights weights;
  SsimParams ssim;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  // Perceptual training: epochs spent on SSIM-only pre-training before the
  // adversarial stage starts. -1 selects epochs / 2.
  std::int64_t stage1_epochs = -1;
  // When non-empty, a resumable checkpoint is written here after every epoch.
  std::string checkpoint_path;
};

void validate_train_config(const TrainConfig& config);

// Step-decay schedule: learning_rate * lr_decay^floor(epoch / lr_step_epochs).
// Requires 0 <= epoch < config.epochs.
double lr_at_epoch(const TrainConfig& config, std::int64_t epoch);

// Effective stage-1 epoch count after resolving the -1 default.
std::int64_t resolve_stage1_epochs(const TrainConfig& config);

// One row per generator update. Loss columns hold unweighted terms; for l1
// training only loss_l1 is populated, for stage 1 only loss_ssim.
struct TrainLogRow {
  std::int64_t epoch = 0;
  std::int64_t step = 0;  // global 1-based generator-update counter
  double loss_total = 0;
  double loss_ssim = 0;
  double loss_l1 = 0;
  double loss_adv = 0;
  double lr = 0;
};

std::string train_log_header();
std::string format_train_log_row(const TrainLogRow& row);

using TrainHook = std::function<void(const TrainLogRow&)>;

// Resumable training state, written at epoch boundaries. The embedded config
// must match the resuming run's config exactly.
struct Checkpoint {
  TrainConfig config;
  int stage = 1;  // 1 = generator-only phase, 2 = adversarial phase
  std::int64_t next_epoch = 0;
  std::int64_t global_step = 0;
  double last_epoch_mean_loss = 0;
  std::string rng_state;
  ParameterSetF gen_params;
  Adam<float> adam_g;
  bool has_discriminator = false;
  ParameterSetF disc_params;
  Adam<float> adam_d;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Trains the generator with mean absolute error. When resume_checkpoint is
// non-empty the run continues from that checkpoint and reproduces the
// uninterrupted run bit-exactly.
ModelBundle train_l1(const BlockPairDataset& dataset, const TrainConfig& config,
                     const TrainHook& hook = nullptr, const std::string& resume_checkpoint = "");

// Two-stage perceptual training: stage 1 minimizes 1 - ms_ssim on the
// generator alone; stage 2 alternates one discriminator update and one
// generator update (combined SSIM + l1 + relativistic adversarial loss) per
// mini-batch, in that order, with freshly initialized Adam state.
ModelBundle train_perceptual(const BlockPairDataset& dataset, const TrainConfig& config,
                             const TrainHook& hook = nullptr,
                             const std::string& resume_checkpoint = "");

// Dispatches on config.method.
ModelBundle train(const BlockPairDataset& dataset, const TrainConfig& config,
                  const TrainHook& hook = nullptr, const std::string& resume_checkpoint = "");

}  // namespace ppkit
