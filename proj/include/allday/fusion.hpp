#pragma once

#include "allday/feature_pyramid.hpp"

#include <torch/torch.h>

#include <string>

namespace allday {

/// kPaper: channel selection + spatial attention. The others are ablations.
enum class FusionMode { kPaper, kConcatenation, kDotProduct, kChannelOnly };

FusionMode parse_fusion_mode(const std::string& name);
std::string to_string(FusionMode mode);

struct FusionConfig {
  FusionMode mode = FusionMode::kPaper;
  int64_t reduction = 16;
  int64_t min_hidden = 8;
  int64_t spatial_kernel = 7;

  int64_t hidden_width(int64_t channels) const;
};

/// Element-wise sum of the two branch features.
torch::Tensor aggregate(const torch::Tensor& t, const torch::Tensor& g);

/// Spatial mean per channel: B x C x h x w -> B x C.
torch::Tensor global_average_pool(const torch::Tensor& x);

/// Channel-wise [max, mean] pooling: B x C x h x w -> B x 2 x h x w.
torch::Tensor channel_pool(const torch::Tensor& x);

struct ChannelWeights {
  torch::Tensor s_t;  // B x C
  torch::Tensor s_g;  // B x C, s_t + s_g = 1
};

/// Fuses one pyramid level of Transformer features t and CNN features g.
class FusionLevelImpl : public torch::nn::Module {
 public:
  FusionLevelImpl(int64_t channels, const FusionConfig& cfg);

  torch::Tensor forward(const torch::Tensor& t, const torch::Tensor& g);

  /// z = ReLU(BN(Linear(GAP(u_hat)))), B x C/r.
  torch::Tensor gate_vector(const torch::Tensor& u_hat);
  /// Per-channel two-way softmax of W_t z and W_g z.
  ChannelWeights channel_select(const torch::Tensor& z);
  /// sigmoid(conv([max, mean] over channels)), B x 1 x h x w.
  torch::Tensor spatial_attention(const torch::Tensor& x);

  FusionMode mode() const { return mode_; }
  int64_t channels() const { return channels_; }

  torch::nn::Linear fc_reduce{nullptr};
  torch::nn::BatchNorm1d fc_norm{nullptr};
  torch::nn::Linear w_t{nullptr};
  torch::nn::Linear w_g{nullptr};
  torch::nn::Conv2d spatial_conv{nullptr};
  torch::nn::Conv2d concat_proj{nullptr};

 private:
  FusionMode mode_;
  int64_t channels_;
};
TORCH_MODULE(FusionLevel);

/// Independent FusionLevel per pyramid level.
class FusionModuleImpl : public torch::nn::Module {
 public:
  explicit FusionModuleImpl(const FusionConfig& cfg);

  FeaturePyramid forward(const FeaturePyramid& t, const FeaturePyramid& g);

  std::array<FusionLevel, 3> levels{nullptr, nullptr, nullptr};
};
TORCH_MODULE(FusionModule);

}  // namespace allday
