#pragma once

#include "allday/dataset.hpp"
#include "allday/depth_model.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace allday {

inline constexpr double kDepthFloor = 0.1;
inline constexpr double kDefaultDepthCap = 60.0;

struct EvalMetrics {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double a3 = 0.0;
};

/// Ground-truth pixels that count: mask set and floor < gt <= cap.
torch::Tensor valid_depth_mask(const torch::Tensor& gt, const torch::Tensor& mask, double cap,
                               double floor = kDepthFloor);

/// The seven error and accuracy metrics over valid pixels, in double precision.
/// Predictions are clipped to [floor, cap] first. Throws EvaluationError when
/// no pixel is valid.
EvalMetrics compute_metrics(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& mask,
                            double cap = kDefaultDepthCap, double floor = kDepthFloor);

/// pred * median(gt) / median(pred), medians over `valid`. Throws
/// EvaluationError on an empty mask or a zero prediction median.
torch::Tensor median_scale(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& valid);

/// Bernoulli(density) pixel mask, reproducible per (seed, frame). density >= 1 is dense.
torch::Tensor sparse_mask(int64_t height, int64_t width, double density, uint64_t seed, int64_t frame);

struct EvalOptions {
  double cap = kDefaultDepthCap;
  bool median_scaling = true;
  double density = 0.05;
  uint64_t seed = 0;
  bool day = true;
  bool night = true;
  /// When set, turbo-coloured predictions are written as <split>_%06d.png.
  std::optional<std::filesystem::path> depth_png_dir;
};

struct FrameResult {
  int64_t frame = 0;
  bool ok = false;
  EvalMetrics metrics;
  std::string error;
};

struct SplitReport {
  std::string name;  // "day" or "night"
  std::vector<FrameResult> frames;
  EvalMetrics mean;  // unweighted mean over frames that evaluated
  size_t evaluated = 0;
  size_t skipped = 0;
};

struct EvalReport {
  std::vector<SplitReport> splits;
  const SplitReport* find(const std::string& name) const;
};

/// Depth for one preprocessed day/night pair, upsampled to height x width.
torch::Tensor predict_depth(DepthModel& model, const torch::Tensor& day, const torch::Tensor& night, int64_t height,
                            int64_t width);

/// Day split: each frame is the day input, its translation the night input.
/// Night split: the translated frame is the input and an approximate inverse
/// translation supplies the day half. Ground truth stays at raw resolution.
EvalReport evaluate(DepthModel& model, const SequenceDataset& dataset, const EvalOptions& options = {});

std::string report_csv(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace allday
