#pragma once

#include <torch/torch.h>

#include <array>

namespace allday {

/// Channel widths of the three pyramid levels, coarse to fine (H/16, H/8, H/4).
inline constexpr std::array<int64_t, 3> kPyramidChannels = {256, 128, 64};
inline constexpr std::array<int64_t, 3> kPyramidStrides = {16, 8, 4};

/// Encoder output: level 0 is B x C0 x H/16 x W/16, level 1 B x C1 x H/8 x W/8,
/// level 2 B x C2 x H/4 x W/4.
struct FeaturePyramid {
  std::array<torch::Tensor, 3> levels;

  const torch::Tensor& operator[](size_t i) const { return levels[i]; }
  torch::Tensor& operator[](size_t i) { return levels[i]; }
};

/// Throws ConfigError unless the pyramid matches an H x W input at the standard
/// strides and channel widths.
void check_pyramid_shape(const FeaturePyramid& p, int64_t batch, int64_t height, int64_t width);

/// Common interface of the CNN and Transformer branches.
class PyramidEncoder : public torch::nn::Module {
 public:
  virtual FeaturePyramid forward(const torch::Tensor& image) = 0;
};

}  // namespace allday
