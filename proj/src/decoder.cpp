#include "allday/decoder.hpp"

#include "allday/errors.hpp"

#include <sstream>

namespace allday {

namespace F = torch::nn::functional;

namespace {

torch::Tensor upsample2x(const torch::Tensor& x) {
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .scale_factor(std::vector<double>{2.0, 2.0})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

torch::nn::Conv2d conv3x3(int64_t in, int64_t out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1));
}

torch::nn::Conv2d conv1x1(int64_t in, int64_t out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1));
}

}  // namespace

AttentionGateImpl::AttentionGateImpl(int64_t skip_channels, int64_t gate_channels, int64_t inter_channels) {
  skip_proj = register_module("skip_proj", conv1x1(skip_channels, inter_channels));
  gate_proj = register_module("gate_proj", conv1x1(gate_channels, inter_channels));
  psi = register_module("psi", conv1x1(inter_channels, 1));
}

torch::Tensor AttentionGateImpl::coefficients(const torch::Tensor& skip, const torch::Tensor& gating) {
  TORCH_CHECK(skip.dim() == 4 && gating.dim() == 4, "attention gate expects 4-D features");
  TORCH_CHECK(gating.size(0) == skip.size(0) && gating.size(2) * 2 == skip.size(2) &&
                  gating.size(3) * 2 == skip.size(3),
              "gating ", gating.sizes(), " must have half the resolution of skip ", skip.sizes());
  auto g = upsample2x(gate_proj->forward(gating));
  return torch::sigmoid(psi->forward(torch::relu(skip_proj->forward(skip) + g)));
}

torch::Tensor AttentionGateImpl::forward(const torch::Tensor& skip, const torch::Tensor& gating) {
  return skip * coefficients(skip, gating);
}

DepthDecoderImpl::DepthDecoderImpl() {
  const auto& c = kPyramidChannels;
  gate1 = register_module("gate1", AttentionGate(c[1], c[0], c[1] / 2));
  gate2 = register_module("gate2", AttentionGate(c[2], c[1], c[2] / 2));
  conv1 = register_module("conv1", conv3x3(c[0] + c[1], c[1]));
  conv2 = register_module("conv2", conv3x3(c[1] + c[2], c[2]));
  conv3 = register_module("conv3", conv3x3(c[2], 32));
  conv4 = register_module("conv4", conv3x3(32, 16));
  head = register_module("head", conv3x3(16, 1));
}

torch::Tensor DepthDecoderImpl::forward(const FeaturePyramid& fused) {
  auto x = fused[0];
  x = torch::relu(conv1->forward(torch::cat({upsample2x(x), gate1->forward(fused[1], x)}, 1)));
  x = torch::relu(conv2->forward(torch::cat({upsample2x(x), gate2->forward(fused[2], x)}, 1)));
  x = torch::relu(conv3->forward(upsample2x(x)));
  x = torch::relu(conv4->forward(upsample2x(x)));
  return torch::sigmoid(head->forward(x));
}

torch::Tensor disp_to_depth(const torch::Tensor& disp, double d_min, double d_max) {
  if (!(d_min > 0.0) || !(d_max >= d_min)) {
    std::ostringstream msg;
    msg << "invalid depth range [" << d_min << ", " << d_max << "]";
    throw ConfigError(msg.str());
  }
  const double inv_max = 1.0 / d_max;
  const double span = 1.0 / d_min - inv_max;
  return 1.0 / (inv_max + span * disp);
}

}  // namespace allday
