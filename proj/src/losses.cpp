#include "allday/losses.hpp"

#include "allday/errors.hpp"

#include <cmath>
#include <sstream>

namespace allday {

namespace F = torch::nn::functional;

void PhotometricConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("photometric alpha must lie in [0, 1]");
  if (window < 3 || window % 2 == 0) throw ConfigError("SSIM window must be odd and >= 3");
}

torch::Tensor ssim_map(const torch::Tensor& a, const torch::Tensor& b, int64_t window) {
  TORCH_CHECK(a.sizes() == b.sizes(), "ssim_map: shape mismatch ", a.sizes(), " vs ", b.sizes());
  TORCH_CHECK(a.dim() == 4, "ssim_map expects B x C x H x W");
  const auto pad = window / 2;
  auto pool = [&](const torch::Tensor& x) {
    auto padded = F::pad(x, F::PadFuncOptions({pad, pad, pad, pad}).mode(torch::kReflect));
    return F::avg_pool2d(padded, F::AvgPool2dFuncOptions(window).stride(1));
  };
  auto mu_a = pool(a);
  auto mu_b = pool(b);
  auto var_a = pool(a * a) - mu_a * mu_a;
  auto var_b = pool(b * b) - mu_b * mu_b;
  auto cov = pool(a * b) - mu_a * mu_b;
  auto num = (2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2);
  auto den = (mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2);
  return (num / den).clamp(-1.0, 1.0);
}

torch::Tensor photometric_error(const torch::Tensor& target, const torch::Tensor& reconstruction,
                                const PhotometricConfig& cfg) {
  auto l1 = (target - reconstruction).abs().mean(1, /*keepdim=*/true);
  auto dssim = (1.0 - ssim_map(target, reconstruction, cfg.window)).mean(1, /*keepdim=*/true);
  return cfg.alpha / 2.0 * dssim + (1.0 - cfg.alpha) * l1;
}

torch::Tensor photometric_loss(const torch::Tensor& target, const std::vector<Warped>& reconstructions,
                               const PhotometricConfig& cfg) {
  TORCH_CHECK(!reconstructions.empty(), "photometric_loss needs at least one reconstruction");
  std::vector<torch::Tensor> errors;
  std::vector<torch::Tensor> masks;
  for (const auto& r : reconstructions) {
    TORCH_CHECK(r.image.sizes() == target.sizes(), "reconstruction shape ", r.image.sizes(), " != target ",
                target.sizes());
    errors.push_back(photometric_error(target, r.image, cfg));
    masks.push_back(r.valid.defined() ? r.valid.to(target.dtype())
                                      : torch::ones_like(errors.back()));
  }

  if (cfg.source_aggregation == SourceAggregation::kMean) {
    auto sum = torch::zeros({}, target.options());
    for (size_t i = 0; i < errors.size(); ++i) {
      sum = sum + (errors[i] * masks[i]).sum() / masks[i].sum().clamp_min(1.0);
    }
    return sum / static_cast<double>(errors.size());
  }

  auto err = torch::stack(errors, 0);
  auto mask = torch::stack(masks, 0);
  // Invalid sources never win the minimum.
  auto big = torch::full_like(err, 1e6);
  auto best = torch::where(mask > 0, err, big).amin(0);
  auto any_valid = (mask.amax(0) > 0).to(target.dtype());
  best = torch::where(any_valid > 0, best, torch::zeros_like(best));
  return (best * any_valid).sum() / any_valid.sum().clamp_min(1.0);
}

torch::Tensor total_loss(const torch::Tensor& day_loss, const torch::Tensor& night_loss) {
  const double day = day_loss.item<double>();
  const double night = night_loss.item<double>();
  if (!std::isfinite(day) || !std::isfinite(night) || day < 0.0 || night < 0.0) {
    std::ostringstream msg;
    msg << "non-finite or negative photometric loss (day=" << day << ", night=" << night << ")";
    throw TrainingError(msg.str());
  }
  return day_loss + night_loss;
}

torch::Tensor edge_aware_smoothness(const torch::Tensor& disparity, const torch::Tensor& image) {
  auto norm = disparity / (disparity.mean({2, 3}, true) + 1e-7);
  auto dx = (norm.slice(3, 0, -1) - norm.slice(3, 1)).abs();
  auto dy = (norm.slice(2, 0, -1) - norm.slice(2, 1)).abs();
  auto ix = (image.slice(3, 0, -1) - image.slice(3, 1)).abs().mean(1, true);
  auto iy = (image.slice(2, 0, -1) - image.slice(2, 1)).abs().mean(1, true);
  return (dx * torch::exp(-ix)).mean() + (dy * torch::exp(-iy)).mean();
}

}  // namespace allday
