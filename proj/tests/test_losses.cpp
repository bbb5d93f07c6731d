#include "allday/errors.hpp"
#include "allday/losses.hpp"

#include "gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace allday;

namespace {

// Reflect-101 index, as used by reflection padding.
int64_t reflect(int64_t i, int64_t n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

// Per-pixel SSIM with plain loops over a 3x3 window.
double ssim_at(const torch::Tensor& a, const torch::Tensor& b, int64_t c, int64_t y, int64_t x) {
  const auto h = a.size(2), w = a.size(3);
  double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const double va = a[0][c][reflect(y + dy, h)][reflect(x + dx, w)].item<double>();
      const double vb = b[0][c][reflect(y + dy, h)][reflect(x + dx, w)].item<double>();
      ma += va;
      mb += vb;
      saa += va * va;
      sbb += vb * vb;
      sab += va * vb;
    }
  }
  ma /= 9;
  mb /= 9;
  const double va = saa / 9 - ma * ma, vb = sbb / 9 - mb * mb, cov = sab / 9 - ma * mb;
  const double s = (2 * ma * mb + kSsimC1) * (2 * cov + kSsimC2) / ((ma * ma + mb * mb + kSsimC1) * (va + vb + kSsimC2));
  return std::clamp(s, -1.0, 1.0);
}

}  // namespace

TEST(Ssim, MatchesLoopOracle) {
  torch::manual_seed(11);
  const auto a = torch::rand({1, 2, 5, 7}, torch::kFloat64);
  const auto b = (a + 0.2 * torch::randn({1, 2, 5, 7}, torch::kFloat64)).clamp(0, 1);
  const auto s = ssim_map(a, b);
  for (int64_t c = 0; c < 2; ++c) {
    for (int64_t y = 0; y < 5; ++y) {
      for (int64_t x = 0; x < 7; ++x) EXPECT_NEAR(s[0][c][y][x].item<double>(), ssim_at(a, b, c, y, x), 1e-12);
    }
  }
}

TEST(Ssim, IdenticalImagesScoreOne) {
  const auto a = torch::rand({2, 3, 6, 6}, torch::kFloat64);
  EXPECT_TRUE(torch::allclose(ssim_map(a, a), torch::ones_like(a), 0.0, 1e-12));
}

TEST(Ssim, SymmetricAndBounded) {
  torch::manual_seed(12);
  for (int i = 0; i < 10; ++i) {
    const auto a = torch::rand({1, 3, 8, 8}, torch::kFloat64);
    const auto b = torch::rand({1, 3, 8, 8}, torch::kFloat64);
    const auto s = ssim_map(a, b);
    EXPECT_TRUE(torch::allclose(s, ssim_map(b, a), 0.0, 1e-14));
    EXPECT_LE(s.max().item<double>(), 1.0);
    EXPECT_GE(s.min().item<double>(), -1.0);
  }
}

TEST(PhotometricError, ZeroForIdenticalImages) {
  const auto a = torch::rand({2, 3, 6, 8});
  EXPECT_LT(photometric_error(a, a, {}).abs().max().item<double>(), 1e-6);
}

TEST(PhotometricError, AlphaZeroIsChannelMeanL1) {
  torch::manual_seed(13);
  const auto a = torch::rand({1, 3, 4, 4}, torch::kFloat64);
  const auto b = torch::rand({1, 3, 4, 4}, torch::kFloat64);
  PhotometricConfig cfg;
  cfg.alpha = 0.0;
  EXPECT_TRUE(torch::allclose(photometric_error(a, b, cfg), (a - b).abs().mean(1, true), 0.0, 1e-14));
}

TEST(PhotometricError, WeightsSsimAndL1) {
  torch::manual_seed(14);
  const auto a = torch::rand({1, 3, 5, 5}, torch::kFloat64);
  const auto b = torch::rand({1, 3, 5, 5}, torch::kFloat64);
  const auto e = photometric_error(a, b, {});
  const double y = 2, x = 3;
  double dssim = 0, l1 = 0;
  for (int c = 0; c < 3; ++c) {
    dssim += (1.0 - ssim_at(a, b, c, 2, 3)) / 3.0;
    l1 += std::abs(a[0][c][2][3].item<double>() - b[0][c][2][3].item<double>()) / 3.0;
  }
  EXPECT_NEAR(e[0][0][y][x].item<double>(), 0.85 / 2 * dssim + 0.15 * l1, 1e-12);
}

TEST(PhotometricConfig, RejectsAlphaOutsideUnitInterval) {
  PhotometricConfig cfg;
  cfg.alpha = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.alpha = 0.5;
  cfg.window = 4;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(PhotometricLoss, MeanAggregationAveragesMaskedSourceMeans) {
  torch::manual_seed(15);
  PhotometricConfig cfg;
  cfg.alpha = 0.0;
  const auto target = torch::zeros({1, 1, 2, 2}, torch::kFloat64);
  const auto r1 = torch::tensor({1.0, 2.0, 3.0, 4.0}, torch::kFloat64).view({1, 1, 2, 2});
  const auto r2 = torch::tensor({5.0, 1.0, 1.0, 1.0}, torch::kFloat64).view({1, 1, 2, 2});
  const auto m1 = torch::tensor({true, true, false, false}).view({1, 1, 2, 2});
  const auto m2 = torch::tensor({false, true, true, true}).view({1, 1, 2, 2});
  const auto loss = photometric_loss(target, {{r1, m1}, {r2, m2}}, cfg);
  EXPECT_NEAR(loss.item<double>(), (1.5 + 1.0) / 2.0, 1e-12);

  cfg.source_aggregation = SourceAggregation::kPerPixelMin;
  // Per pixel: {1, min(2,1), 1, 1}.
  EXPECT_NEAR(photometric_loss(target, {{r1, m1}, {r2, m2}}, cfg).item<double>(), 1.0, 1e-12);
}

TEST(PhotometricLoss, PerPixelMinSkipsPixelsWithoutValidSource) {
  PhotometricConfig cfg;
  cfg.alpha = 0.0;
  cfg.source_aggregation = SourceAggregation::kPerPixelMin;
  const auto target = torch::zeros({1, 1, 2, 2}, torch::kFloat64);
  const auto r = torch::tensor({2.0, 100.0, 4.0, 100.0}, torch::kFloat64).view({1, 1, 2, 2});
  const auto m = torch::tensor({true, false, true, false}).view({1, 1, 2, 2});
  EXPECT_NEAR(photometric_loss(target, {{r, m}}, cfg).item<double>(), 3.0, 1e-12);
}

TEST(PhotometricLoss, NonNegative) {
  torch::manual_seed(16);
  for (int i = 0; i < 10; ++i) {
    const auto t = torch::rand({2, 3, 6, 6});
    const auto loss = photometric_loss(t, {{torch::rand({2, 3, 6, 6}), torch::ones({2, 1, 6, 6}, torch::kBool)}}, {});
    EXPECT_GE(loss.item<double>(), 0.0);
  }
}

TEST(PhotometricLoss, GradientsMatchFiniteDifferences) {
  torch::manual_seed(17);
  const auto opts = torch::TensorOptions(torch::kFloat64).requires_grad(true);
  auto target = torch::rand({1, 3, 8, 16}, opts);
  auto r1 = torch::rand({1, 3, 8, 16}, opts);
  auto r2 = torch::rand({1, 3, 8, 16}, opts);
  const auto m = torch::rand({1, 1, 8, 16}) > 0.2;
  for (auto agg : {SourceAggregation::kMean, SourceAggregation::kPerPixelMin}) {
    PhotometricConfig cfg;
    cfg.source_aggregation = agg;
    const auto f = [&] { return photometric_loss(target, {{r1, m}, {r2, torch::ones_like(m)}}, cfg); };
    const auto r = testkit::gradcheck(f, {{"target", target}, {"recon1", r1}, {"recon2", r2}});
    EXPECT_TRUE(r.ok) << r.worst_name << " " << r.worst_error;
  }
}

TEST(TotalLoss, SumsDomains) {
  EXPECT_DOUBLE_EQ(total_loss(torch::tensor(0.25), torch::tensor(0.5)).item<double>(), 0.75);
}

TEST(TotalLoss, RejectsNonFiniteOrNegative) {
  const auto nan = torch::tensor(std::numeric_limits<double>::quiet_NaN());
  EXPECT_THROW(total_loss(nan, torch::tensor(0.1)), TrainingError);
  EXPECT_THROW(total_loss(torch::tensor(0.1), torch::tensor(std::numeric_limits<double>::infinity())), TrainingError);
  EXPECT_THROW(total_loss(torch::tensor(-0.1), torch::tensor(0.1)), TrainingError);
}

TEST(Smoothness, ZeroForConstantDisparity) {
  const auto disp = torch::full({1, 1, 6, 6}, 0.3);
  EXPECT_NEAR(edge_aware_smoothness(disp, torch::rand({1, 3, 6, 6})).item<double>(), 0.0, 1e-7);
}

TEST(Ssim, BlackAgainstWhiteIsNearZero) {
  const auto a = torch::zeros({1, 3, 5, 6}, torch::kFloat64);
  const auto b = torch::ones({1, 3, 5, 6}, torch::kFloat64);
  const double expected = kSsimC1 / (1.0 + kSsimC1);
  EXPECT_TRUE(torch::allclose(ssim_map(a, b), torch::full({1, 3, 5, 6}, expected, torch::kFloat64), 0.0, 1e-12));
  EXPECT_NEAR(expected, 1e-4, 1e-6);
}

TEST(PhotometricError, BlackTargetWhiteReconstruction) {
  const auto target = torch::zeros({1, 3, 4, 4}, torch::kFloat64);
  const auto recon = torch::ones({1, 3, 4, 4}, torch::kFloat64);
  const double ssim = kSsimC1 / (1.0 + kSsimC1);
  const double expected = 0.85 * (1.0 - ssim) / 2.0 + 0.15;
  const auto e = photometric_error(target, recon, PhotometricConfig{});
  EXPECT_TRUE(torch::allclose(e, torch::full_like(e, expected), 0.0, 1e-12));
  EXPECT_NEAR(expected, 0.5750, 1e-4);
}

TEST(PhotometricLoss, PerPixelMinWithOnePerfectSourceIsZero) {
  torch::manual_seed(19);
  PhotometricConfig cfg;
  cfg.source_aggregation = SourceAggregation::kPerPixelMin;
  const auto target = torch::rand({1, 3, 6, 7}, torch::kFloat64);
  const auto mask = torch::ones({1, 1, 6, 7}, torch::kBool);
  const auto bad = torch::rand({1, 3, 6, 7}, torch::kFloat64);
  EXPECT_NEAR(photometric_loss(target, {{bad, mask}, {target.clone(), mask}}, cfg).item<double>(), 0.0, 1e-12);
  cfg.source_aggregation = SourceAggregation::kMean;
  EXPECT_GT(photometric_loss(target, {{bad, mask}, {target.clone(), mask}}, cfg).item<double>(), 0.0);
}

TEST(PhotometricLoss, ShrinkingMaskKeepsRemainingPixelContributions) {
  torch::manual_seed(20);
  const auto target = torch::rand({1, 3, 8, 10}, torch::kFloat64);
  const auto recon = torch::rand({1, 3, 8, 10}, torch::kFloat64);
  const auto err = photometric_error(target, recon, PhotometricConfig{});
  auto mask = torch::ones({1, 1, 8, 10}, torch::kBool);
  for (int i = 0; i < 5; ++i) {
    const auto loss = photometric_loss(target, {{recon, mask}}, PhotometricConfig{}).item<double>();
    EXPECT_NEAR(loss, err.masked_select(mask).mean().item<double>(), 1e-12);
    mask = mask & (torch::rand({1, 1, 8, 10}) < 0.8);
  }
}
