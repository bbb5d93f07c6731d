#include "allday/pose_net.hpp"

namespace allday {

PoseNetImpl::PoseNetImpl() {
  encoder = torch::nn::Sequential();
  const int64_t widths[] = {16, 32, 64, 128, 256};
  const int64_t kernels[] = {7, 5, 3, 3, 3};
  int64_t in = 6;
  for (int i = 0; i < 5; ++i) {
    encoder->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(in, widths[i], kernels[i]).stride(2).padding(kernels[i] / 2).bias(false)));
    encoder->push_back(torch::nn::BatchNorm2d(widths[i]));
    encoder->push_back(torch::nn::ReLU());
    in = widths[i];
  }
  register_module("encoder", encoder);
  head = register_module("head", torch::nn::Linear(in, 6));
  torch::NoGradGuard no_grad;
  head->weight.zero_();
  head->bias.zero_();
}

PoseTransform PoseNetImpl::forward(const torch::Tensor& frame_a, const torch::Tensor& frame_b) {
  TORCH_CHECK(frame_a.sizes() == frame_b.sizes(), "pose net frames differ in shape: ", frame_a.sizes(), " vs ",
              frame_b.sizes());
  auto features = encoder->forward(torch::cat({frame_a, frame_b}, 1)).mean({2, 3});
  auto out = head->forward(features) * kOutputScale;
  return {out.slice(1, 0, 3), out.slice(1, 3, 6)};
}

}  // namespace allday
