#include "allday/cnn_branch.hpp"

#include "allday/errors.hpp"

#include <sstream>

namespace allday {

namespace F = torch::nn::functional;

namespace {

torch::nn::Conv2d conv3x3(int64_t in, int64_t out, int64_t stride) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1).bias(false));
}

}  // namespace

ResidualUnitImpl::ResidualUnitImpl(int64_t in_channels, int64_t out_channels, int64_t stride) {
  conv1 = register_module("conv1", conv3x3(in_channels, out_channels, stride));
  bn1 = register_module("bn1", torch::nn::BatchNorm2d(out_channels));
  conv2 = register_module("conv2", conv3x3(out_channels, out_channels, 1));
  bn2 = register_module("bn2", torch::nn::BatchNorm2d(out_channels));
  if (stride != 1 || in_channels != out_channels) {
    proj = register_module(
        "proj",
        torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 1).stride(stride).bias(false)));
    proj_bn = register_module("proj_bn", torch::nn::BatchNorm2d(out_channels));
  }
}

torch::Tensor ResidualUnitImpl::shortcut(const torch::Tensor& x) {
  return proj ? proj_bn->forward(proj->forward(x)) : x;
}

torch::Tensor ResidualUnitImpl::forward(const torch::Tensor& x) {
  auto y = torch::relu(bn1->forward(conv1->forward(x)));
  y = bn2->forward(conv2->forward(y));
  return torch::relu(y + shortcut(x));
}

CnnBranch::CnnBranch(const CnnConfig& cfg, int64_t height, int64_t width) {
  if (height % 16 != 0 || width % 16 != 0) {
    std::ostringstream msg;
    msg << "CNN branch needs H, W divisible by 16, got " << height << "x" << width;
    throw ConfigError(msg.str());
  }
  for (auto n : cfg.units) {
    if (n < 1) throw ConfigError("each CNN stage needs at least one residual unit");
  }
  stem_conv = register_module(
      "stem_conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, 64, 7).stride(2).padding(3).bias(false)));
  stem_bn = register_module("stem_bn", torch::nn::BatchNorm2d(64));

  const std::array<int64_t, 3> widths = {64, 128, 256};
  int64_t in = 64;
  for (size_t s = 0; s < 3; ++s) {
    torch::nn::Sequential stage;
    for (int64_t u = 0; u < cfg.units[s]; ++u) {
      const int64_t stride = (s > 0 && u == 0) ? 2 : 1;
      stage->push_back(ResidualUnit(u == 0 ? in : widths[s], widths[s], stride));
    }
    in = widths[s];
    stages[s] = register_module("stage" + std::to_string(s + 1), stage);
  }
}

FeaturePyramid CnnBranch::forward(const torch::Tensor& image) {
  TORCH_CHECK(image.size(2) % 16 == 0 && image.size(3) % 16 == 0, "CNN branch input must be divisible by 16");
  auto x = torch::relu(stem_bn->forward(stem_conv->forward(image)));
  x = F::max_pool2d(x, F::MaxPool2dFuncOptions(3).stride(2).padding(1));
  FeaturePyramid p;
  p[2] = stages[0]->forward(x);
  p[1] = stages[1]->forward(p[2]);
  p[0] = stages[2]->forward(p[1]);
  return p;
}

}  // namespace allday
