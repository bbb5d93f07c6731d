#include "allday/fusion.hpp"

#include "allday/errors.hpp"

namespace allday {

FusionMode parse_fusion_mode(const std::string& name) {
  if (name == "paper") return FusionMode::kPaper;
  if (name == "concatenation") return FusionMode::kConcatenation;
  if (name == "dot_product") return FusionMode::kDotProduct;
  if (name == "channel_only") return FusionMode::kChannelOnly;
  throw ConfigError("unknown fusion mode '" + name + "'");
}

std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::kPaper: return "paper";
    case FusionMode::kConcatenation: return "concatenation";
    case FusionMode::kDotProduct: return "dot_product";
    case FusionMode::kChannelOnly: return "channel_only";
  }
  return "?";
}

int64_t FusionConfig::hidden_width(int64_t channels) const {
  return std::max(channels / reduction, min_hidden);
}

torch::Tensor aggregate(const torch::Tensor& t, const torch::Tensor& g) {
  TORCH_CHECK(t.sizes() == g.sizes(), "aggregate: shape mismatch ", t.sizes(), " vs ", g.sizes());
  return t + g;
}

torch::Tensor global_average_pool(const torch::Tensor& x) { return x.mean({2, 3}); }

torch::Tensor channel_pool(const torch::Tensor& x) {
  return torch::cat({std::get<0>(x.max(1, /*keepdim=*/true)), x.mean(1, /*keepdim=*/true)}, 1);
}

FusionLevelImpl::FusionLevelImpl(int64_t channels, const FusionConfig& cfg) : mode_(cfg.mode), channels_(channels) {
  if (cfg.reduction <= 0 || cfg.spatial_kernel % 2 == 0) {
    throw ConfigError("fusion needs a positive reduction and an odd spatial kernel");
  }
  const auto hidden = cfg.hidden_width(channels);
  if (mode_ == FusionMode::kPaper || mode_ == FusionMode::kChannelOnly) {
    fc_reduce = register_module("fc_reduce", torch::nn::Linear(channels, hidden));
    fc_norm = register_module("fc_norm", torch::nn::BatchNorm1d(hidden));
    w_t = register_module("w_t", torch::nn::Linear(torch::nn::LinearOptions(hidden, channels).bias(false)));
    w_g = register_module("w_g", torch::nn::Linear(torch::nn::LinearOptions(hidden, channels).bias(false)));
  }
  if (mode_ == FusionMode::kPaper) {
    spatial_conv = register_module(
        "spatial_conv",
        torch::nn::Conv2d(torch::nn::Conv2dOptions(2, 1, cfg.spatial_kernel).padding(cfg.spatial_kernel / 2)));
  }
  if (mode_ == FusionMode::kConcatenation) {
    concat_proj = register_module("concat_proj", torch::nn::Conv2d(torch::nn::Conv2dOptions(2 * channels, channels, 1)));
  }
}

torch::Tensor FusionLevelImpl::gate_vector(const torch::Tensor& u_hat) {
  return torch::relu(fc_norm->forward(fc_reduce->forward(global_average_pool(u_hat))));
}

ChannelWeights FusionLevelImpl::channel_select(const torch::Tensor& z) {
  auto logits = torch::stack({w_t->forward(z), w_g->forward(z)}, 0);
  auto s = torch::softmax(logits, 0);
  return {s[0], s[1]};
}

torch::Tensor FusionLevelImpl::spatial_attention(const torch::Tensor& x) {
  return torch::sigmoid(spatial_conv->forward(channel_pool(x)));
}

torch::Tensor FusionLevelImpl::forward(const torch::Tensor& t, const torch::Tensor& g) {
  TORCH_CHECK(t.sizes() == g.sizes(), "fuse_level: shape mismatch ", t.sizes(), " vs ", g.sizes());
  TORCH_CHECK(t.size(1) == channels_, "fuse_level built for ", channels_, " channels, got ", t.size(1));
  switch (mode_) {
    case FusionMode::kDotProduct:
      return t * g;
    case FusionMode::kConcatenation:
      return concat_proj->forward(torch::cat({t, g}, 1));
    case FusionMode::kChannelOnly:
    case FusionMode::kPaper: {
      auto sel = channel_select(gate_vector(aggregate(t, g)));
      auto s_t = sel.s_t.unsqueeze(-1).unsqueeze(-1);
      auto s_g = sel.s_g.unsqueeze(-1).unsqueeze(-1);
      if (mode_ == FusionMode::kChannelOnly) return s_t * t + s_g * g;
      auto attended_t = spatial_attention(t) * s_t * t;
      auto attended_g = spatial_attention(g) * s_g * g;
      return attended_t + attended_g;
    }
  }
  return {};
}

FusionModuleImpl::FusionModuleImpl(const FusionConfig& cfg) {
  for (size_t i = 0; i < 3; ++i) {
    levels[i] = register_module("level" + std::to_string(i), FusionLevel(kPyramidChannels[i], cfg));
  }
}

FeaturePyramid FusionModuleImpl::forward(const FeaturePyramid& t, const FeaturePyramid& g) {
  FeaturePyramid u;
  for (size_t i = 0; i < 3; ++i) u[i] = levels[i]->forward(t[i], g[i]);
  return u;
}

}  // namespace allday
