#pragma once

#include "allday/geometry.hpp"

#include <torch/torch.h>

namespace allday {

/// Regresses the rigid motion between two frames from their 6-channel stack.
/// The head starts at zero, so a fresh network predicts the identity.
class PoseNetImpl : public torch::nn::Module {
 public:
  static constexpr double kOutputScale = 0.01;

  PoseNetImpl();

  /// Motion taking frame_a camera points into frame_b's camera.
  PoseTransform forward(const torch::Tensor& frame_a, const torch::Tensor& frame_b);

  torch::nn::Sequential encoder{nullptr};
  torch::nn::Linear head{nullptr};
};
TORCH_MODULE(PoseNet);

}  // namespace allday
