#include "allday/depth_model.hpp"

#include "allday/errors.hpp"

namespace allday {

EncoderDesign parse_encoder_design(const std::string& name) {
  if (name == "both") return EncoderDesign::kBoth;
  if (name == "cnn_only") return EncoderDesign::kCnnOnly;
  if (name == "transformer_only") return EncoderDesign::kTransformerOnly;
  throw ConfigError("unknown encoder design '" + name + "'");
}

std::string to_string(EncoderDesign design) {
  switch (design) {
    case EncoderDesign::kBoth: return "both";
    case EncoderDesign::kCnnOnly: return "cnn_only";
    case EncoderDesign::kTransformerOnly: return "transformer_only";
  }
  return "?";
}

ModelConfig ModelConfig::full(int64_t height, int64_t width) {
  ModelConfig cfg;
  cfg.height = height;
  cfg.width = width;
  cfg.cnn = CnnConfig::resnet34();
  cfg.transformer = TransformerConfig::desk();
  return cfg;
}

void ModelConfig::validate() const {
  if (height <= 0 || width <= 0 || height % 16 != 0 || width % 16 != 0) {
    throw ConfigError("model input " + std::to_string(height) + "x" + std::to_string(width) +
                      " must be positive multiples of 16");
  }
  transformer.validate(height, width);
  if (!(d_min > 0.0) || !(d_max > d_min)) throw ConfigError("depth range needs 0 < d_min < d_max");
}

nlohmann::json ModelConfig::to_json() const {
  return {
      {"height", height},
      {"width", width},
      {"encoder", to_string(encoder)},
      {"cnn_units", cnn.units},
      {"transformer",
       {{"patch_size", transformer.patch_size},
        {"latent_dim", transformer.latent_dim},
        {"depth", transformer.depth},
        {"heads", transformer.heads},
        {"head_dim", transformer.head_dim},
        {"mlp_ratio", transformer.mlp_ratio}}},
      {"fusion",
       {{"mode", to_string(fusion.mode)},
        {"reduction", fusion.reduction},
        {"min_hidden", fusion.min_hidden},
        {"spatial_kernel", fusion.spatial_kernel}}},
      {"d_min", d_min},
      {"d_max", d_max},
  };
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.height = j.at("height").get<int64_t>();
  cfg.width = j.at("width").get<int64_t>();
  cfg.encoder = parse_encoder_design(j.at("encoder").get<std::string>());
  cfg.cnn.units = j.at("cnn_units").get<std::array<int64_t, 3>>();
  const auto& t = j.at("transformer");
  cfg.transformer = {t.at("patch_size").get<int64_t>(), t.at("latent_dim").get<int64_t>(),
                     t.at("depth").get<int64_t>(),      t.at("heads").get<int64_t>(),
                     t.at("head_dim").get<int64_t>(),   t.at("mlp_ratio").get<double>()};
  const auto& f = j.at("fusion");
  cfg.fusion.mode = parse_fusion_mode(f.at("mode").get<std::string>());
  cfg.fusion.reduction = f.at("reduction").get<int64_t>();
  cfg.fusion.min_hidden = f.at("min_hidden").get<int64_t>();
  cfg.fusion.spatial_kernel = f.at("spatial_kernel").get<int64_t>();
  cfg.d_min = j.at("d_min").get<double>();
  cfg.d_max = j.at("d_max").get<double>();
  return cfg;
}

DepthModelImpl::DepthModelImpl(const ModelConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  auto make_cnn = [&] { return std::make_shared<CnnBranch>(cfg.cnn, cfg.height, cfg.width); };
  auto make_vit = [&] { return std::make_shared<TransformerBranch>(cfg.transformer, cfg.height, cfg.width); };
  switch (cfg.encoder) {
    case EncoderDesign::kBoth:
      day_encoder = make_cnn();
      night_encoder = make_vit();
      break;
    case EncoderDesign::kCnnOnly:
      day_encoder = make_cnn();
      night_encoder = make_cnn();
      break;
    case EncoderDesign::kTransformerOnly:
      day_encoder = make_vit();
      night_encoder = make_vit();
      break;
  }
  register_module("day_encoder", day_encoder);
  register_module("night_encoder", night_encoder);
  fusion = register_module("fusion", FusionModule(cfg.fusion));
  decoder = register_module("decoder", DepthDecoder());
}

std::pair<FeaturePyramid, FeaturePyramid> DepthModelImpl::encode(const torch::Tensor& day,
                                                                 const torch::Tensor& night) {
  TORCH_CHECK(day.sizes() == night.sizes(), "day/night images differ in shape: ", day.sizes(), " vs ",
              night.sizes());
  TORCH_CHECK(day.dim() == 4 && day.size(1) == 3 && day.size(2) == cfg_.height && day.size(3) == cfg_.width,
              "model expects B x 3 x ", cfg_.height, " x ", cfg_.width, ", got ", day.sizes());
  return {day_encoder->forward(day), night_encoder->forward(night)};
}

DepthPrediction DepthModelImpl::forward(const torch::Tensor& day, const torch::Tensor& night) {
  auto [day_features, night_features] = encode(day, night);
  // The night (Transformer) features take the t role, the day (CNN) features g.
  auto fused = fusion->forward(night_features, day_features);
  auto disp = decoder->forward(fused);
  return {disp, disp_to_depth(disp, cfg_.d_min, cfg_.d_max)};
}

NetworksImpl::NetworksImpl(const ModelConfig& cfg) {
  depth = register_module("depth", DepthModel(cfg));
  pose = register_module("pose", PoseNet());
}

}  // namespace allday
