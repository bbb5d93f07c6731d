#pragma once

#include "allday/geometry.hpp"

#include <torch/torch.h>

#include <vector>

namespace allday {

enum class SourceAggregation { kMean, kPerPixelMin };

struct PhotometricConfig {
  double alpha = 0.85;  // weight of the SSIM term
  SourceAggregation source_aggregation = SourceAggregation::kMean;
  int64_t window = 3;

  void validate() const;
};

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Per-pixel SSIM (B x C x H x W) from window x window mean pooling over
/// reflection-padded inputs.
torch::Tensor ssim_map(const torch::Tensor& a, const torch::Tensor& b, int64_t window = 3);

/// Per-pixel photometric error (B x 1 x H x W), channel-averaged:
/// alpha/2 * (1 - SSIM) + (1 - alpha) * |target - recon|.
torch::Tensor photometric_error(const torch::Tensor& target, const torch::Tensor& reconstruction,
                                const PhotometricConfig& cfg);

/// Scalar reprojection loss of one target against one or more masked reconstructions.
///
/// kMean averages the per-source masked spatial means. kPerPixelMin takes the
/// minimum error over valid sources at each pixel, then the spatial mean over
/// pixels with at least one valid source.
torch::Tensor photometric_loss(const torch::Tensor& target, const std::vector<Warped>& reconstructions,
                               const PhotometricConfig& cfg);

/// Day + night loss. Throws TrainingError if either term is non-finite or negative.
torch::Tensor total_loss(const torch::Tensor& day_loss, const torch::Tensor& night_loss);

/// Edge-aware first-order smoothness of mean-normalised disparity. Optional
/// extension term; the default objective does not use it.
torch::Tensor edge_aware_smoothness(const torch::Tensor& disparity, const torch::Tensor& image);

}  // namespace allday
