#pragma once

#include "allday/cnn_branch.hpp"
#include "allday/decoder.hpp"
#include "allday/fusion.hpp"
#include "allday/pose_net.hpp"
#include "allday/transformer_branch.hpp"

#include <json.hpp>
#include <torch/torch.h>

#include <memory>
#include <string>

namespace allday {

/// Which encoder each half of the pair goes through. kBoth is the CNN for the
/// day image and the Transformer for the night image.
enum class EncoderDesign { kBoth, kCnnOnly, kTransformerOnly };

EncoderDesign parse_encoder_design(const std::string& name);
std::string to_string(EncoderDesign design);

struct ModelConfig {
  int64_t height = 96;
  int64_t width = 160;
  EncoderDesign encoder = EncoderDesign::kBoth;
  CnnConfig cnn = CnnConfig::tiny();
  TransformerConfig transformer = TransformerConfig::tiny();
  FusionConfig fusion;
  double d_min = 0.1;
  double d_max = 100.0;

  /// 256 x 512 with ResNet-34 stage depths and the desk Transformer.
  static ModelConfig full(int64_t height = 256, int64_t width = 512);

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct DepthPrediction {
  torch::Tensor disparity;  // B x 1 x H x W in (0, 1)
  torch::Tensor depth;      // B x 1 x H x W in [d_min, d_max]
};

/// Two encoders, level-wise fusion and the gated decoder.
class DepthModelImpl : public torch::nn::Module {
 public:
  explicit DepthModelImpl(const ModelConfig& cfg);

  DepthPrediction forward(const torch::Tensor& day, const torch::Tensor& night);

  /// Encoder outputs before fusion: {day encoder, night encoder}.
  std::pair<FeaturePyramid, FeaturePyramid> encode(const torch::Tensor& day, const torch::Tensor& night);

  const ModelConfig& config() const { return cfg_; }

  std::shared_ptr<PyramidEncoder> day_encoder;
  std::shared_ptr<PyramidEncoder> night_encoder;
  FusionModule fusion{nullptr};
  DepthDecoder decoder{nullptr};

 private:
  ModelConfig cfg_;
};
TORCH_MODULE(DepthModel);

/// Everything that is trained: the depth model and the pose network.
class NetworksImpl : public torch::nn::Module {
 public:
  explicit NetworksImpl(const ModelConfig& cfg);

  DepthModel depth{nullptr};
  PoseNet pose{nullptr};
};
TORCH_MODULE(Networks);

}  // namespace allday
