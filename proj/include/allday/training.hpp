#pragma once

#include "allday/checkpoint.hpp"
#include "allday/dataset.hpp"
#include "allday/depth_model.hpp"
#include "allday/key_value.hpp"
#include "allday/losses.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace allday {

struct TrainingConfig {
  int64_t epochs = 30;
  int64_t batch_size = 16;
  double lr_peak = 1e-5;
  int64_t warmup_epochs = 5;
  double beta1 = 0.9;
  double beta2 = 0.99;
  uint64_t seed = 0;
  PhotometricConfig photometric;
  double grad_clip = 0.0;          // global-norm clip, 0 disables
  double smoothness_weight = 0.0;  // optional edge-aware disparity smoothness
  int64_t max_steps = -1;          // stop early after this many steps, -1 = schedule length
  int64_t checkpoint_every = 0;    // steps between periodic checkpoints, 0 = final only
  int workers = 0;                 // batch prefetch threads
  ModelConfig model = ModelConfig::full();
  DatasetConfig data{.preprocess = PreprocessConfig::paper()};

  /// Reference optimiser and schedule; full-size model and 256 x 512 input.
  static TrainingConfig paper();
  /// 96 x 160 input, batch 2, tiny branches: the CPU-scale default.
  static TrainingConfig desk();

  /// Throws ConfigError on inconsistent settings.
  void validate() const;

  /// Flat key=value view used for config files, CLI overrides and checkpoints.
  KeyValues to_key_values() const;
  /// Overrides the listed keys; unknown keys or bad values throw ConfigError.
  void apply(const KeyValues& kv);
};

/// Linear warmup from 0 to lr_peak over warmup_epochs, then cosine decay to 0
/// at the end of the schedule (epochs * steps_per_epoch). Accepts fractional steps.
double lr_at(double step, int64_t steps_per_epoch, const TrainingConfig& cfg);

struct StepLosses {
  torch::Tensor total;
  torch::Tensor day;
  torch::Tensor night;
  DepthPrediction prediction;
  /// Target-to-source rigid transforms (B x 4 x 4), previous then next frame.
  std::array<torch::Tensor, 2> transforms;
  std::array<Warped, 2> day_reconstructions;
  std::array<Warped, 2> night_reconstructions;
};

struct StepStats {
  int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double loss_day = 0.0;
  double loss_night = 0.0;
};

/// Owns the networks and Adam state; single logical owner of the parameters.
class Trainer {
 public:
  Trainer(TrainingConfig cfg, int64_t steps_per_epoch);
  /// Restores networks, optimiser moments and the step counter.
  Trainer(const Checkpoint& ckpt, int64_t steps_per_epoch);

  /// Forward pass and objective for one batch, without touching the optimiser.
  StepLosses compute_losses(const Batch& batch);
  /// Forward, backward and one Adam update at lr_at(step()). Throws
  /// TrainingError with the batch's frame indices if the loss is not finite.
  StepStats train_step(const Batch& batch);

  Checkpoint checkpoint() const;
  void save(const std::filesystem::path& path) const;

  int64_t step() const { return step_; }
  int64_t steps_per_epoch() const { return steps_per_epoch_; }
  const TrainingConfig& config() const { return cfg_; }
  Networks& networks() { return nets_; }
  torch::optim::Adam& optimizer() { return *optimizer_; }

 private:
  void build();

  TrainingConfig cfg_;
  int64_t steps_per_epoch_;
  int64_t step_ = 0;
  Networks nets_{nullptr};
  std::unique_ptr<torch::optim::Adam> optimizer_;
};

/// Batches of one epoch: a seeded shuffle of all samples, incomplete tail dropped.
std::vector<std::vector<size_t>> epoch_batches(size_t dataset_size, int64_t batch_size, uint64_t seed, int64_t epoch);

struct FitOptions {
  std::optional<std::filesystem::path> resume;
  std::function<void(const StepStats&)> on_step;
};

struct FitResult {
  std::vector<StepStats> trace;
  std::filesystem::path final_checkpoint;
};

/// Runs the schedule (or up to max_steps), writing `metrics.csv`, periodic
/// `step_%06d.ckpt` files and `final.ckpt` under out_dir. epochs == 0 writes
/// only the initial checkpoint.
FitResult fit(const TrainingConfig& cfg, const SequenceDataset& dataset, const std::filesystem::path& out_dir,
              const FitOptions& options = {});

/// Rebuilds the depth model stored in a checkpoint (evaluation mode).
DepthModel load_depth_model(const Checkpoint& ckpt);
TrainingConfig config_from_checkpoint(const Checkpoint& ckpt);

}  // namespace allday
