#pragma once

#include "allday/feature_pyramid.hpp"

#include <torch/torch.h>

namespace allday {

struct TransformerConfig {
  int64_t patch_size = 16;
  int64_t latent_dim = 192;
  int64_t depth = 4;
  int64_t heads = 4;
  int64_t head_dim = 48;
  double mlp_ratio = 4.0;

  static TransformerConfig desk() { return {}; }
  /// Small enough for CPU unit tests and the overfit run.
  static TransformerConfig tiny() { return {16, 64, 2, 2, 32, 2.0}; }
  /// ViT-Base sized; builds, but is not exercised end to end.
  static TransformerConfig paper() { return {16, 768, 12, 12, 64, 4.0}; }

  /// Throws ConfigError if the sizes are inconsistent or H, W are not multiples
  /// of both the patch size and 16.
  void validate(int64_t height, int64_t width) const;
};

struct AttentionOutput {
  torch::Tensor values;   // B x heads x N x D_h
  torch::Tensor weights;  // B x heads x N x N, rows sum to 1
};

/// softmax(q k^T / sqrt(D_h)) v for B x heads x N x D_h inputs.
AttentionOutput scaled_dot_attention(const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v);

/// Single-head self-attention with a joint projection w_qkv of shape D0 x 3 D_h.
AttentionOutput self_attention(const torch::Tensor& tokens, const torch::Tensor& w_qkv);

class PatchEmbedImpl : public torch::nn::Module {
 public:
  PatchEmbedImpl(const TransformerConfig& cfg, int64_t height, int64_t width);

  /// B x 3 x H x W -> B x N x D0, positional embedding added.
  torch::Tensor forward(const torch::Tensor& image);

  int64_t grid_height() const { return grid_h_; }
  int64_t grid_width() const { return grid_w_; }

  torch::nn::Conv2d proj{nullptr};
  torch::Tensor pos_embed;

 private:
  int64_t patch_;
  int64_t grid_h_;
  int64_t grid_w_;
};
TORCH_MODULE(PatchEmbed);

class MultiHeadAttentionImpl : public torch::nn::Module {
 public:
  MultiHeadAttentionImpl(int64_t dim, int64_t heads, int64_t head_dim);

  torch::Tensor forward(const torch::Tensor& tokens);
  /// Same as forward, also returning the attention weights.
  std::pair<torch::Tensor, torch::Tensor> forward_with_weights(const torch::Tensor& tokens);

  torch::nn::Linear qkv{nullptr};
  torch::nn::Linear out{nullptr};

 private:
  int64_t heads_;
  int64_t head_dim_;
};
TORCH_MODULE(MultiHeadAttention);

/// Pre-norm encoder block: z + MSA(LN(z)), then z + MLP(LN(z)).
class EncoderBlockImpl : public torch::nn::Module {
 public:
  EncoderBlockImpl(int64_t dim, int64_t heads, int64_t head_dim, double mlp_ratio);

  torch::Tensor forward(const torch::Tensor& tokens);

  /// Zeroes the attention and MLP output projections, making the block an identity.
  void zero_output_projections();

  torch::nn::LayerNorm norm1{nullptr};
  MultiHeadAttention attn{nullptr};
  torch::nn::LayerNorm norm2{nullptr};
  torch::nn::Linear fc1{nullptr};
  torch::nn::Linear fc2{nullptr};
};
TORCH_MODULE(EncoderBlock);

/// 2x bilinear upsample, 3x3 conv, batch norm, ReLU.
class UpsampleStageImpl : public torch::nn::Module {
 public:
  UpsampleStageImpl(int64_t in_channels, int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv{nullptr};
  torch::nn::BatchNorm2d norm{nullptr};
};
TORCH_MODULE(UpsampleStage);

class TransformerBranch : public PyramidEncoder {
 public:
  TransformerBranch(const TransformerConfig& cfg, int64_t height, int64_t width);

  FeaturePyramid forward(const torch::Tensor& image) override;

  torch::Tensor encode(const torch::Tensor& image);
  /// Token sequence B x N x D0 -> (t0, t1, t2).
  FeaturePyramid decode_pyramid(const torch::Tensor& tokens);

  const TransformerConfig& config() const { return cfg_; }

  PatchEmbed embed{nullptr};
  torch::nn::ModuleList blocks;
  torch::nn::LayerNorm norm{nullptr};
  torch::nn::Conv2d to_level0{nullptr};
  torch::nn::BatchNorm2d level0_norm{nullptr};
  UpsampleStage up1{nullptr};
  UpsampleStage up2{nullptr};

 private:
  TransformerConfig cfg_;
  int64_t height_;
  int64_t width_;
};

}  // namespace allday
