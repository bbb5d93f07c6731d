#include "allday/cnn_branch.hpp"
#include "allday/decoder.hpp"
#include "allday/depth_model.hpp"
#include "allday/errors.hpp"
#include "allday/fusion.hpp"
#include "allday/pose_net.hpp"
#include "allday/transformer_branch.hpp"

#include "gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace allday;

namespace {

FeaturePyramid random_pyramid(int64_t batch, int64_t h, int64_t w, torch::ScalarType dtype = torch::kFloat32) {
  FeaturePyramid p;
  for (size_t i = 0; i < 3; ++i) {
    p[i] = torch::randn({batch, kPyramidChannels[i], h / kPyramidStrides[i], w / kPyramidStrides[i]}, dtype);
  }
  return p;
}

// sigmoid(conv2d([max_c x, mean_c x])) with explicit loops and zero padding.
torch::Tensor spatial_attention_oracle(const torch::Tensor& x, const torch::Tensor& weight, double bias) {
  const auto b = x.size(0), h = x.size(2), w = x.size(3), k = weight.size(-1), r = k / 2;
  const auto pooled = torch::stack({std::get<0>(x.max(1)), x.mean(1)}, 1);
  auto out = torch::zeros({b, 1, h, w}, torch::kFloat64);
  for (int64_t n = 0; n < b; ++n) {
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t xx = 0; xx < w; ++xx) {
        double acc = bias;
        for (int64_t c = 0; c < 2; ++c) {
          for (int64_t i = 0; i < k; ++i) {
            for (int64_t j = 0; j < k; ++j) {
              const auto yy = y + i - r, xs = xx + j - r;
              if (yy < 0 || yy >= h || xs < 0 || xs >= w) continue;
              acc += weight[0][c][i][j].item<double>() * pooled[n][c][yy][xs].item<double>();
            }
          }
        }
        out[n][0][y][xx] = 1.0 / (1.0 + std::exp(-acc));
      }
    }
  }
  return out;
}

}  // namespace

TEST(Attention, RowsSumToOne) {
  torch::manual_seed(21);
  const auto q = torch::randn({2, 3, 5, 4}), k = torch::randn({2, 3, 5, 4}), v = torch::randn({2, 3, 5, 4});
  const auto att = scaled_dot_attention(q, k, v);
  EXPECT_TRUE(torch::allclose(att.weights.sum(-1), torch::ones({2, 3, 5}), 0.0, 1e-5));
  EXPECT_GE(att.weights.min().item<double>(), 0.0);
}

TEST(Attention, SingleHeadMatchesLoopOracle) {
  torch::manual_seed(22);
  const int64_t n = 4, d0 = 3, dh = 2;
  const auto z = torch::randn({1, n, d0}, torch::kFloat64);
  const auto w = torch::randn({d0, 3 * dh}, torch::kFloat64);
  const auto att = self_attention(z, w);
  const auto qkv = z[0].matmul(w);
  for (int64_t i = 0; i < n; ++i) {
    std::vector<double> logits(n);
    double mx = -1e300;
    for (int64_t j = 0; j < n; ++j) {
      double dot = 0;
      for (int64_t c = 0; c < dh; ++c) dot += qkv[i][c].item<double>() * qkv[j][dh + c].item<double>();
      logits[j] = dot / std::sqrt(static_cast<double>(dh));
      mx = std::max(mx, logits[j]);
    }
    double denom = 0;
    for (auto& l : logits) denom += (l = std::exp(l - mx));
    for (int64_t c = 0; c < dh; ++c) {
      double val = 0;
      for (int64_t j = 0; j < n; ++j) val += logits[j] / denom * qkv[j][2 * dh + c].item<double>();
      EXPECT_NEAR(att.values[0][i][c].item<double>(), val, 1e-12);
    }
    for (int64_t j = 0; j < n; ++j) EXPECT_NEAR(att.weights[0][i][j].item<double>(), logits[j] / denom, 1e-12);
  }
}

TEST(EncoderBlock, ZeroedProjectionsGiveIdentity) {
  EncoderBlock block(16, 2, 8, 2.0);
  block->zero_output_projections();
  const auto z = torch::randn({2, 7, 16});
  EXPECT_TRUE(torch::allclose(block(z), z, 0.0, 1e-6));
}

TEST(EncoderBlock, GradientsMatchFiniteDifferences) {
  torch::manual_seed(23);
  EncoderBlock block(8, 2, 4, 2.0);
  block->to(torch::kFloat64);
  auto z = torch::randn({1, 5, 8}, torch::TensorOptions(torch::kFloat64).requires_grad(true));
  const auto w = torch::randn({1, 5, 8}, torch::kFloat64);
  auto wrt = testkit::parameters_of(*block);
  wrt.push_back({"tokens", z});
  const auto r = testkit::gradcheck([&] { return (block(z) * w).sum(); }, wrt);
  EXPECT_TRUE(r.ok) << r.worst_name << " " << r.worst_error;
}

TEST(TransformerConfig, RejectsIndivisibleSizes) {
  EXPECT_THROW(TransformerConfig::tiny().validate(100, 160), ConfigError);
  auto cfg = TransformerConfig::tiny();
  cfg.patch_size = 24;
  EXPECT_THROW(cfg.validate(96, 160), ConfigError);
  EXPECT_NO_THROW(TransformerConfig::paper().validate(256, 512));
}

TEST(TransformerBranch, PyramidShapes) {
  TransformerBranch branch(TransformerConfig::tiny(), 96, 160);
  EXPECT_NO_THROW(check_pyramid_shape(branch.forward(torch::rand({2, 3, 96, 160})), 2, 96, 160));
}

TEST(ResidualUnit, ProjectionOnlyWhenShapeChanges) {
  ResidualUnit same(8, 8, 1);
  EXPECT_TRUE(same->proj.is_empty());
  ResidualUnit down(4, 8, 2);
  ASSERT_FALSE(down->proj.is_empty());
  EXPECT_EQ(down(torch::rand({2, 4, 8, 8})).sizes(), (std::vector<int64_t>{2, 8, 4, 4}));
}

TEST(ResidualUnit, GradientsMatchFiniteDifferences) {
  torch::manual_seed(24);
  ResidualUnit unit(3, 4, 2);
  unit->to(torch::kFloat64);
  auto x = torch::randn({2, 3, 6, 6}, torch::TensorOptions(torch::kFloat64).requires_grad(true));
  const auto w = torch::randn({2, 4, 3, 3}, torch::kFloat64);
  auto wrt = testkit::parameters_of(*unit);
  wrt.push_back({"input", x});
  const auto r = testkit::gradcheck([&] { return (unit(x) * w).sum(); }, wrt);
  EXPECT_TRUE(r.ok) << r.worst_name << " " << r.worst_error;
}

TEST(CnnBranch, PyramidShapes) {
  CnnBranch branch(CnnConfig::tiny(), 96, 160);
  EXPECT_NO_THROW(check_pyramid_shape(branch.forward(torch::rand({2, 3, 96, 160})), 2, 96, 160));
}

TEST(Fusion, ChannelWeightsArePartitionOfUnity) {
  torch::manual_seed(25);
  FusionLevel level(64, FusionConfig{});
  const auto t = torch::randn({3, 64, 5, 7}), g = torch::randn({3, 64, 5, 7});
  const auto sel = level->channel_select(level->gate_vector(aggregate(t, g)));
  EXPECT_TRUE(torch::allclose(sel.s_t + sel.s_g, torch::ones({3, 64}), 0.0, 1e-6));
  EXPECT_GT(sel.s_t.min().item<double>(), 0.0);
  EXPECT_LT(sel.s_t.max().item<double>(), 1.0);
}

TEST(Fusion, SpatialAttentionMatchesLoopOracle) {
  torch::manual_seed(26);
  FusionConfig cfg;
  cfg.spatial_kernel = 3;
  FusionLevel level(16, cfg);
  level->to(torch::kFloat64);
  const auto x = torch::randn({2, 16, 4, 5}, torch::kFloat64);
  const auto expected =
      spatial_attention_oracle(x, level->spatial_conv->weight, level->spatial_conv->bias.item<double>());
  EXPECT_TRUE(torch::allclose(level->spatial_attention(x), expected, 0.0, 1e-12));
}

TEST(Fusion, IdenticalInputsReduceToSpatialAttention) {
  torch::manual_seed(27);
  FusionLevel level(32, FusionConfig{});
  const auto x = torch::randn({2, 32, 6, 6});
  EXPECT_TRUE(torch::allclose(level(x, x), level->spatial_attention(x) * x, 1e-5, 1e-6));
}

TEST(Fusion, ConcatenationMatchesLoopOracle) {
  torch::manual_seed(28);
  FusionConfig cfg;
  cfg.mode = FusionMode::kConcatenation;
  FusionLevel level(3, cfg);
  level->to(torch::kFloat64);
  const auto t = torch::randn({1, 3, 2, 2}, torch::kFloat64), g = torch::randn({1, 3, 2, 2}, torch::kFloat64);
  const auto out = level(t, g);
  const auto& w = level->concat_proj->weight;
  const auto& b = level->concat_proj->bias;
  for (int64_t o = 0; o < 3; ++o) {
    for (int64_t y = 0; y < 2; ++y) {
      for (int64_t x = 0; x < 2; ++x) {
        double acc = b[o].item<double>();
        for (int64_t c = 0; c < 3; ++c) {
          acc += w[o][c][0][0].item<double>() * t[0][c][y][x].item<double>();
          acc += w[o][3 + c][0][0].item<double>() * g[0][c][y][x].item<double>();
        }
        EXPECT_NEAR(out[0][o][y][x].item<double>(), acc, 1e-12);
      }
    }
  }
}

TEST(Fusion, DotProductIsElementwise) {
  FusionConfig cfg;
  cfg.mode = FusionMode::kDotProduct;
  FusionLevel level(8, cfg);
  EXPECT_TRUE(level->parameters().empty());
  const auto t = torch::randn({2, 8, 3, 3}), g = torch::randn({2, 8, 3, 3});
  const auto out = level(t, g);
  for (int64_t i = 0; i < out.numel(); ++i) {
    EXPECT_FLOAT_EQ(out.view(-1)[i].item<float>(), t.view(-1)[i].item<float>() * g.view(-1)[i].item<float>());
  }
}

TEST(Fusion, GradientsMatchFiniteDifferences) {
  torch::manual_seed(29);
  FusionConfig cfg;
  cfg.spatial_kernel = 3;
  cfg.min_hidden = 4;
  FusionLevel level(8, cfg);
  level->to(torch::kFloat64);
  const auto opts = torch::TensorOptions(torch::kFloat64).requires_grad(true);
  auto t = torch::randn({2, 8, 4, 4}, opts), g = torch::randn({2, 8, 4, 4}, opts);
  const auto w = torch::randn({2, 8, 4, 4}, torch::kFloat64);
  auto wrt = testkit::parameters_of(*level);
  wrt.push_back({"t", t});
  wrt.push_back({"g", g});
  const auto r = testkit::gradcheck([&] { return (level(t, g) * w).sum(); }, wrt);
  EXPECT_TRUE(r.ok) << r.worst_name << " " << r.worst_error;
}

TEST(Fusion, ModuleKeepsPyramidShapes) {
  for (auto mode : {FusionMode::kPaper, FusionMode::kConcatenation, FusionMode::kDotProduct, FusionMode::kChannelOnly}) {
    FusionConfig cfg;
    cfg.mode = mode;
    FusionModule fusion(cfg);
    const auto out = fusion(random_pyramid(2, 64, 96), random_pyramid(2, 64, 96));
    EXPECT_NO_THROW(check_pyramid_shape(out, 2, 64, 96)) << to_string(mode);
  }
}

TEST(Fusion, ParsesModeNames) {
  for (auto mode : {FusionMode::kPaper, FusionMode::kConcatenation, FusionMode::kDotProduct, FusionMode::kChannelOnly}) {
    EXPECT_EQ(parse_fusion_mode(to_string(mode)), mode);
  }
  EXPECT_THROW(parse_fusion_mode("sum"), ConfigError);
}

TEST(Decoder, FullResolutionDisparityInUnitInterval) {
  torch::manual_seed(30);
  DepthDecoder decoder;
  const auto disp = decoder(random_pyramid(2, 64, 96));
  EXPECT_EQ(disp.sizes(), (std::vector<int64_t>{2, 1, 64, 96}));
  EXPECT_GT(disp.min().item<double>(), 0.0);
  EXPECT_LT(disp.max().item<double>(), 1.0);
}

TEST(Decoder, GateCoefficientsInUnitInterval) {
  AttentionGate gate(64, 128, 32);
  const auto a = gate->coefficients(torch::randn({1, 64, 8, 8}), torch::randn({1, 128, 4, 4}));
  EXPECT_EQ(a.sizes(), (std::vector<int64_t>{1, 1, 8, 8}));
  EXPECT_GT(a.min().item<double>(), 0.0);
  EXPECT_LT(a.max().item<double>(), 1.0);
}

TEST(DispToDepth, MapsEndpointsAndDecreases) {
  const auto disp = torch::linspace(0, 1, 11, torch::kFloat64);
  const auto depth = disp_to_depth(disp, 0.1, 100.0);
  EXPECT_NEAR(depth[0].item<double>(), 100.0, 1e-9);
  EXPECT_NEAR(depth[10].item<double>(), 0.1, 1e-12);
  EXPECT_TRUE((depth.slice(0, 1) < depth.slice(0, 0, -1)).all().item<bool>());
  EXPECT_THROW(disp_to_depth(disp, 0.0, 1.0), ConfigError);
  EXPECT_THROW(disp_to_depth(disp, 5.0, 1.0), ConfigError);
}

TEST(PoseNet, FreshNetworkPredictsIdentity) {
  PoseNet net;
  const auto pose = net(torch::rand({2, 3, 64, 96}), torch::rand({2, 3, 64, 96}));
  EXPECT_TRUE(torch::allclose(pose_to_matrix(pose), torch::eye(4).expand({2, 4, 4}), 0.0, 1e-7));
}

TEST(PoseNet, ReceivesGradient) {
  PoseNet net;
  const auto pose = net(torch::rand({2, 3, 64, 96}), torch::rand({2, 3, 64, 96}));
  (pose.axis_angle.sum() + pose.translation.sum()).backward();
  EXPECT_GT(net->head->weight.grad().abs().sum().item<double>(), 0.0);
}

TEST(DepthModel, OutputsAtModelResolution) {
  torch::manual_seed(31);
  ModelConfig cfg;
  DepthModel model(cfg);
  const auto out = model(torch::rand({2, 3, 96, 160}), torch::rand({2, 3, 96, 160}));
  EXPECT_EQ(out.depth.sizes(), (std::vector<int64_t>{2, 1, 96, 160}));
  EXPECT_GE(out.depth.min().item<double>(), cfg.d_min);
  EXPECT_LE(out.depth.max().item<double>(), cfg.d_max);
  EXPECT_THROW(model(torch::rand({1, 3, 64, 160}), torch::rand({1, 3, 64, 160})), c10::Error);
}

TEST(DepthModel, EncoderAblationsBuildAndRun) {
  for (auto design : {EncoderDesign::kCnnOnly, EncoderDesign::kTransformerOnly}) {
    ModelConfig cfg;
    cfg.encoder = design;
    DepthModel model(cfg);
    const auto out = model(torch::rand({2, 3, 96, 160}), torch::rand({2, 3, 96, 160}));
    EXPECT_EQ(out.disparity.sizes(), (std::vector<int64_t>{2, 1, 96, 160})) << to_string(design);
    EXPECT_EQ(parse_encoder_design(to_string(design)), design);
  }
  EXPECT_THROW(parse_encoder_design("resnet"), ConfigError);
}

TEST(ModelConfig, JsonRoundTrip) {
  auto cfg = ModelConfig::full();
  cfg.fusion.mode = FusionMode::kChannelOnly;
  cfg.d_max = 80.0;
  const auto back = ModelConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());
}

TEST(ModelConfig, RejectsBadSizes) {
  ModelConfig cfg;
  cfg.height = 100;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.d_min = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Attention, SingleTokenReturnsItsValue) {
  torch::manual_seed(32);
  const auto q = torch::randn({2, 3, 1, 4}), k = torch::randn({2, 3, 1, 4}), v = torch::randn({2, 3, 1, 4});
  EXPECT_TRUE(torch::allclose(scaled_dot_attention(q, k, v).values, v, 0.0, 1e-6));
}

TEST(EncoderBlock, PermutingTokensPermutesOutputs) {
  torch::manual_seed(33);
  EncoderBlock block(16, 2, 8, 2.0);
  block->to(torch::kFloat64);
  const auto z = torch::randn({2, 9, 16}, torch::kFloat64);
  const auto perm = torch::randperm(9, torch::kLong);
  const auto a = block(z).index_select(1, perm);
  const auto b = block(z.index_select(1, perm));
  EXPECT_TRUE(torch::allclose(a, b, 0.0, 1e-12));
}

TEST(TransformerBranch, GradientReachesPatchEmbedding) {
  torch::manual_seed(34);
  TransformerBranch branch(TransformerConfig::tiny(), 32, 48);
  const auto p = branch.forward(torch::rand({2, 3, 32, 48}));
  (p[0].pow(2).sum() + p[1].pow(2).sum() + p[2].pow(2).sum()).backward();
  ASSERT_TRUE(branch.embed->proj->weight.grad().defined());
  EXPECT_GT(branch.embed->proj->weight.grad().norm().item<double>(), 0.0);
  EXPECT_GT(branch.embed->pos_embed.grad().norm().item<double>(), 0.0);
}

TEST(ResidualUnit, ZeroedFinalNormGivesShortcut) {
  torch::manual_seed(35);
  for (auto [cin, stride] : {std::pair<int64_t, int64_t>{8, 1}, {4, 2}}) {
    ResidualUnit unit(cin, 8, stride);
    torch::NoGradGuard guard;
    unit->bn2->weight.zero_();
    unit->bn2->bias.zero_();
    const auto x = torch::randn({2, cin, 8, 8});
    EXPECT_TRUE(torch::allclose(unit(x), torch::relu(unit->shortcut(x)), 0.0, 1e-6));
  }
}

TEST(Fusion, GlobalAveragePoolMatchesLoop) {
  torch::manual_seed(36);
  const auto x = torch::randn({2, 5, 3, 4}, torch::kFloat64);
  const auto gap = global_average_pool(x);
  ASSERT_EQ(gap.sizes(), (std::vector<int64_t>{2, 5}));
  for (int64_t b = 0; b < 2; ++b) {
    for (int64_t c = 0; c < 5; ++c) {
      double acc = 0;
      for (int64_t y = 0; y < 3; ++y)
        for (int64_t xx = 0; xx < 4; ++xx) acc += x[b][c][y][xx].item<double>();
      EXPECT_NEAR(gap[b][c].item<double>(), acc / 12.0, 1e-12);
    }
  }
}

TEST(Fusion, ChannelPoolMatchesLoop) {
  torch::manual_seed(37);
  const auto x = torch::randn({2, 6, 3, 4}, torch::kFloat64);
  const auto pooled = channel_pool(x);
  ASSERT_EQ(pooled.sizes(), (std::vector<int64_t>{2, 2, 3, 4}));
  for (int64_t b = 0; b < 2; ++b) {
    for (int64_t y = 0; y < 3; ++y) {
      for (int64_t xx = 0; xx < 4; ++xx) {
        double mx = -1e300, sum = 0;
        for (int64_t c = 0; c < 6; ++c) {
          mx = std::max(mx, x[b][c][y][xx].item<double>());
          sum += x[b][c][y][xx].item<double>();
        }
        EXPECT_DOUBLE_EQ(pooled[b][0][y][xx].item<double>(), mx);
        EXPECT_NEAR(pooled[b][1][y][xx].item<double>(), sum / 6.0, 1e-12);
      }
    }
  }
}

TEST(Fusion, ChannelSelectMatchesExponentRatio) {
  torch::manual_seed(38);
  FusionLevel level(4, FusionConfig{});
  level->to(torch::kFloat64);
  const auto hidden = level->w_t->weight.size(1);
  const auto z = torch::randn({3, hidden}, torch::kFloat64);
  const auto sel = level->channel_select(z);
  const auto& wt = level->w_t->weight;
  const auto& wg = level->w_g->weight;
  for (int64_t b = 0; b < 3; ++b) {
    for (int64_t c = 0; c < 4; ++c) {
      double lt = 0, lg = 0;
      for (int64_t j = 0; j < hidden; ++j) {
        lt += wt[c][j].item<double>() * z[b][j].item<double>();
        lg += wg[c][j].item<double>() * z[b][j].item<double>();
      }
      EXPECT_NEAR(sel.s_t[b][c].item<double>(), std::exp(lt) / (std::exp(lt) + std::exp(lg)), 1e-12);
      EXPECT_NEAR(sel.s_g[b][c].item<double>(), std::exp(lg) / (std::exp(lt) + std::exp(lg)), 1e-12);
    }
  }
}

TEST(Fusion, EqualSelectorWeightsSplitEvenly) {
  FusionLevel level(4, FusionConfig{});
  torch::NoGradGuard guard;
  level->w_g->weight.copy_(level->w_t->weight);
  const auto sel = level->channel_select(torch::randn({2, level->w_t->weight.size(1)}));
  EXPECT_TRUE(torch::allclose(sel.s_t, torch::full({2, 4}, 0.5), 0.0, 1e-7));
}

TEST(Fusion, ZeroInputsFuseToZero) {
  torch::manual_seed(39);
  FusionLevel level(16, FusionConfig{});
  const auto zero = torch::zeros({2, 16, 4, 5});
  EXPECT_TRUE(torch::equal(level(zero, zero), zero));
}

TEST(Fusion, SmallLevelGradientsMatchFiniteDifferences) {
  torch::manual_seed(40);
  FusionLevel level(4, FusionConfig{});
  level->to(torch::kFloat64);
  const auto opts = torch::TensorOptions(torch::kFloat64).requires_grad(true);
  auto t = torch::randn({2, 4, 6, 8}, opts), g = torch::randn({2, 4, 6, 8}, opts);
  const auto w = torch::randn({2, 4, 6, 8}, torch::kFloat64);
  auto wrt = testkit::parameters_of(*level);
  wrt.push_back({"t", t});
  wrt.push_back({"g", g});
  const auto r = testkit::gradcheck([&] { return (level(t, g) * w).sum(); }, wrt);
  EXPECT_TRUE(r.ok) << r.worst_name << " " << r.worst_error;
}

TEST(Fusion, PyramidLevelsAreIndependent) {
  torch::manual_seed(41);
  FusionModule fusion(FusionConfig{});
  fusion->eval();
  auto t = random_pyramid(2, 32, 48), g = random_pyramid(2, 32, 48);
  const auto before = fusion(t, g);
  t[1] = t[1] + torch::randn_like(t[1]);
  const auto after = fusion(t, g);
  EXPECT_TRUE(torch::equal(before[0], after[0]));
  EXPECT_TRUE(torch::equal(before[2], after[2]));
  EXPECT_FALSE(torch::equal(before[1], after[1]));
}

TEST(Decoder, ZeroGatingMatchesTwoLayerOracle) {
  torch::manual_seed(42);
  AttentionGate gate(3, 4, 2);
  gate->to(torch::kFloat64);
  torch::NoGradGuard guard;
  gate->gate_proj->bias.zero_();
  const auto skip = torch::randn({1, 3, 4, 4}, torch::kFloat64);
  const auto a = gate->coefficients(skip, torch::zeros({1, 4, 2, 2}, torch::kFloat64));
  const auto& ws = gate->skip_proj->weight;
  const auto& bs = gate->skip_proj->bias;
  const auto& wp = gate->psi->weight;
  const auto& bp = gate->psi->bias;
  for (int64_t y = 0; y < 4; ++y) {
    for (int64_t x = 0; x < 4; ++x) {
      double acc = bp[0].item<double>();
      for (int64_t m = 0; m < 2; ++m) {
        double h = bs[m].item<double>();
        for (int64_t c = 0; c < 3; ++c) h += ws[m][c][0][0].item<double>() * skip[0][c][y][x].item<double>();
        acc += wp[0][m][0][0].item<double>() * std::max(h, 0.0);
      }
      EXPECT_NEAR(a[0][0][y][x].item<double>(), 1.0 / (1.0 + std::exp(-acc)), 1e-12);
    }
  }
}

TEST(Decoder, GradientReachesEveryPyramidLevel) {
  torch::manual_seed(43);
  DepthDecoder decoder;
  auto p = random_pyramid(2, 32, 48);
  for (auto& level : p.levels) level.requires_grad_(true);
  decoder(p).sum().backward();
  for (const auto& level : p.levels) {
    ASSERT_TRUE(level.grad().defined());
    EXPECT_GT(level.grad().norm().item<double>(), 0.0);
  }
}

TEST(DispToDepth, HandComputedMidpoint) {
  const auto d = disp_to_depth(torch::tensor({0.5}, torch::kFloat64), 0.1, 100.0);
  EXPECT_NEAR(d.item<double>(), 1.0 / (0.01 + 9.99 * 0.5), 1e-12);
  EXPECT_NEAR(d.item<double>(), 0.1998002, 1e-7);
  EXPECT_TRUE(torch::allclose(disp_to_depth(torch::rand({5}), 3.0, 3.0), torch::full({5}, 3.0), 0.0, 1e-6));
}
