#include "allday/transformer_branch.hpp"

#include "allday/errors.hpp"

#include <cmath>
#include <sstream>

namespace allday {

namespace F = torch::nn::functional;

void TransformerConfig::validate(int64_t height, int64_t width) const {
  std::ostringstream why;
  if (patch_size <= 0 || latent_dim <= 0 || depth < 0 || heads <= 0 || head_dim <= 0 || !(mlp_ratio > 0.0)) {
    why << "transformer sizes must be positive";
  } else if (height % patch_size != 0 || width % patch_size != 0) {
    why << "image " << height << "x" << width << " is not divisible by patch size " << patch_size;
  } else if (height % 16 != 0 || width % 16 != 0) {
    why << "image " << height << "x" << width << " is not divisible by 16";
  }
  if (!why.str().empty()) throw ConfigError(why.str());
}

AttentionOutput scaled_dot_attention(const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.size(-1)));
  auto weights = torch::softmax(q.matmul(k.transpose(-2, -1)) * scale, -1);
  return {weights.matmul(v), weights};
}

AttentionOutput self_attention(const torch::Tensor& tokens, const torch::Tensor& w_qkv) {
  TORCH_CHECK(tokens.dim() == 3, "tokens must be B x N x D0");
  TORCH_CHECK(w_qkv.dim() == 2 && w_qkv.size(0) == tokens.size(2) && w_qkv.size(1) % 3 == 0,
              "w_qkv must be D0 x 3D_h, got ", w_qkv.sizes());
  auto qkv = tokens.matmul(w_qkv).chunk(3, -1);
  auto out = scaled_dot_attention(qkv[0].unsqueeze(1), qkv[1].unsqueeze(1), qkv[2].unsqueeze(1));
  return {out.values.squeeze(1), out.weights.squeeze(1)};
}

PatchEmbedImpl::PatchEmbedImpl(const TransformerConfig& cfg, int64_t height, int64_t width)
    : patch_(cfg.patch_size), grid_h_(height / cfg.patch_size), grid_w_(width / cfg.patch_size) {
  cfg.validate(height, width);
  proj = register_module(
      "proj", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, cfg.latent_dim, patch_).stride(patch_)));
  pos_embed = register_parameter("pos_embed", torch::randn({1, grid_h_ * grid_w_, cfg.latent_dim}) * 0.02);
}

torch::Tensor PatchEmbedImpl::forward(const torch::Tensor& image) {
  TORCH_CHECK(image.size(2) == grid_h_ * patch_ && image.size(3) == grid_w_ * patch_, "patch embed built for ",
              grid_h_ * patch_, "x", grid_w_ * patch_, ", got ", image.sizes());
  // A stride-P, kernel-P convolution is the linear projection of flattened patches.
  return proj->forward(image).flatten(2).transpose(1, 2) + pos_embed;
}

MultiHeadAttentionImpl::MultiHeadAttentionImpl(int64_t dim, int64_t heads, int64_t head_dim)
    : heads_(heads), head_dim_(head_dim) {
  qkv = register_module("qkv", torch::nn::Linear(dim, 3 * heads * head_dim));
  out = register_module("out", torch::nn::Linear(heads * head_dim, dim));
}

std::pair<torch::Tensor, torch::Tensor> MultiHeadAttentionImpl::forward_with_weights(const torch::Tensor& tokens) {
  const auto batch = tokens.size(0);
  const auto n = tokens.size(1);
  auto qkv_heads = qkv->forward(tokens).view({batch, n, 3, heads_, head_dim_}).permute({2, 0, 3, 1, 4});
  auto att = scaled_dot_attention(qkv_heads[0], qkv_heads[1], qkv_heads[2]);
  auto merged = att.values.transpose(1, 2).reshape({batch, n, heads_ * head_dim_});
  return {out->forward(merged), att.weights};
}

torch::Tensor MultiHeadAttentionImpl::forward(const torch::Tensor& tokens) {
  return forward_with_weights(tokens).first;
}

EncoderBlockImpl::EncoderBlockImpl(int64_t dim, int64_t heads, int64_t head_dim, double mlp_ratio) {
  const auto hidden = static_cast<int64_t>(std::llround(static_cast<double>(dim) * mlp_ratio));
  norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  attn = register_module("attn", MultiHeadAttention(dim, heads, head_dim));
  norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  fc1 = register_module("fc1", torch::nn::Linear(dim, hidden));
  fc2 = register_module("fc2", torch::nn::Linear(hidden, dim));
}

torch::Tensor EncoderBlockImpl::forward(const torch::Tensor& tokens) {
  auto z = tokens + attn->forward(norm1->forward(tokens));
  return z + fc2->forward(F::gelu(fc1->forward(norm2->forward(z))));
}

void EncoderBlockImpl::zero_output_projections() {
  torch::NoGradGuard no_grad;
  for (auto* layer : {&attn->out, &fc2}) {
    (*layer)->weight.zero_();
    (*layer)->bias.zero_();
  }
}

UpsampleStageImpl::UpsampleStageImpl(int64_t in_channels, int64_t out_channels) {
  conv = register_module(
      "conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 3).padding(1).bias(false)));
  norm = register_module("norm", torch::nn::BatchNorm2d(out_channels));
}

torch::Tensor UpsampleStageImpl::forward(const torch::Tensor& x) {
  auto up = F::interpolate(x, F::InterpolateFuncOptions()
                                  .scale_factor(std::vector<double>{2.0, 2.0})
                                  .mode(torch::kBilinear)
                                  .align_corners(false));
  return torch::relu(norm->forward(conv->forward(up)));
}

TransformerBranch::TransformerBranch(const TransformerConfig& cfg, int64_t height, int64_t width)
    : cfg_(cfg), height_(height), width_(width) {
  cfg.validate(height, width);
  embed = register_module("embed", PatchEmbed(cfg, height, width));
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int64_t i = 0; i < cfg.depth; ++i) {
    blocks->push_back(EncoderBlock(cfg.latent_dim, cfg.heads, cfg.head_dim, cfg.mlp_ratio));
  }
  norm = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg.latent_dim})));
  to_level0 = register_module(
      "to_level0",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg.latent_dim, kPyramidChannels[0], 1).bias(false)));
  level0_norm = register_module("level0_norm", torch::nn::BatchNorm2d(kPyramidChannels[0]));
  up1 = register_module("up1", UpsampleStage(kPyramidChannels[0], kPyramidChannels[1]));
  up2 = register_module("up2", UpsampleStage(kPyramidChannels[1], kPyramidChannels[2]));
}

torch::Tensor TransformerBranch::encode(const torch::Tensor& image) {
  auto z = embed->forward(image);
  for (const auto& block : *blocks) {
    z = block->as<EncoderBlock>()->forward(z);
  }
  return norm->forward(z);
}

FeaturePyramid TransformerBranch::decode_pyramid(const torch::Tensor& tokens) {
  const auto gh = embed->grid_height();
  const auto gw = embed->grid_width();
  if (tokens.dim() != 3 || tokens.size(1) != gh * gw || tokens.size(2) != cfg_.latent_dim) {
    std::ostringstream msg;
    msg << "token sequence " << tokens.sizes() << " does not match a " << gh << "x" << gw << " patch grid";
    throw ConfigError(msg.str());
  }
  const auto batch = tokens.size(0);
  auto grid = tokens.transpose(1, 2).reshape({batch, cfg_.latent_dim, gh, gw});
  if (gh != height_ / 16 || gw != width_ / 16) {
    grid = F::interpolate(grid, F::InterpolateFuncOptions()
                                    .size(std::vector<int64_t>{height_ / 16, width_ / 16})
                                    .mode(torch::kBilinear)
                                    .align_corners(false));
  }
  FeaturePyramid p;
  p[0] = torch::relu(level0_norm->forward(to_level0->forward(grid)));
  p[1] = up1->forward(p[0]);
  p[2] = up2->forward(p[1]);
  return p;
}

FeaturePyramid TransformerBranch::forward(const torch::Tensor& image) {
  return decode_pyramid(encode(image));
}

}  // namespace allday
