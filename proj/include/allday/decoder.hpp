#pragma once

#include "allday/feature_pyramid.hpp"

#include <torch/torch.h>

namespace allday {

/// Additive attention gate. The gating signal has half the skip's resolution.
class AttentionGateImpl : public torch::nn::Module {
 public:
  AttentionGateImpl(int64_t skip_channels, int64_t gate_channels, int64_t inter_channels);

  /// B x 1 x H x W coefficients in (0, 1).
  torch::Tensor coefficients(const torch::Tensor& skip, const torch::Tensor& gating);
  /// skip scaled by its coefficients.
  torch::Tensor forward(const torch::Tensor& skip, const torch::Tensor& gating);

  torch::nn::Conv2d skip_proj{nullptr};
  torch::nn::Conv2d gate_proj{nullptr};
  torch::nn::Conv2d psi{nullptr};
};
TORCH_MODULE(AttentionGate);

/// Decodes a fused pyramid into a full-resolution disparity map in (0, 1).
/// Channel widths 256 -> 128 -> 64 -> 32 -> 16 -> 1.
class DepthDecoderImpl : public torch::nn::Module {
 public:
  DepthDecoderImpl();

  torch::Tensor forward(const FeaturePyramid& fused);

  AttentionGate gate1{nullptr};
  AttentionGate gate2{nullptr};
  torch::nn::Conv2d conv1{nullptr};
  torch::nn::Conv2d conv2{nullptr};
  torch::nn::Conv2d conv3{nullptr};
  torch::nn::Conv2d conv4{nullptr};
  torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(DepthDecoder);

/// depth = 1 / (1/d_max + (1/d_min - 1/d_max) * disp). Throws ConfigError
/// unless 0 < d_min <= d_max.
torch::Tensor disp_to_depth(const torch::Tensor& disp, double d_min, double d_max);

}  // namespace allday
