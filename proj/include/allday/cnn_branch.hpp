#pragma once

#include "allday/feature_pyramid.hpp"

#include <torch/torch.h>

#include <array>

namespace allday {

/// Residual units per stage (64, 128, 256 channels).
struct CnnConfig {
  std::array<int64_t, 3> units = {3, 4, 6};

  static CnnConfig resnet34() { return {}; }
  static CnnConfig tiny() { return {{1, 1, 1}}; }
};

/// Two 3x3 conv + BN layers with an identity or 1x1 projection shortcut.
class ResidualUnitImpl : public torch::nn::Module {
 public:
  ResidualUnitImpl(int64_t in_channels, int64_t out_channels, int64_t stride);

  torch::Tensor forward(const torch::Tensor& x);
  torch::Tensor shortcut(const torch::Tensor& x);

  torch::nn::Conv2d conv1{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr};
  torch::nn::Conv2d conv2{nullptr};
  torch::nn::BatchNorm2d bn2{nullptr};
  torch::nn::Conv2d proj{nullptr};
  torch::nn::BatchNorm2d proj_bn{nullptr};
};
TORCH_MODULE(ResidualUnit);

/// ResNet-34 truncated after the 256-channel stage: stem, then 64/128/256
/// residual stages whose outputs are g2 (H/4), g1 (H/8) and g0 (H/16).
class CnnBranch : public PyramidEncoder {
 public:
  CnnBranch(const CnnConfig& cfg, int64_t height, int64_t width);

  FeaturePyramid forward(const torch::Tensor& image) override;

  torch::nn::Conv2d stem_conv{nullptr};
  torch::nn::BatchNorm2d stem_bn{nullptr};
  std::array<torch::nn::Sequential, 3> stages;
};

}  // namespace allday
