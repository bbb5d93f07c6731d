#include "allday/data.hpp"

#include "allday/errors.hpp"
#include "allday/image_io.hpp"
#include "allday/random.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <random>
#include <sstream>

namespace allday {

namespace F = torch::nn::functional;

CropWindow crop_window(const PreprocessConfig& cfg, int64_t height, int64_t width) {
  if (!cfg.crop) return {0, 0, width, height};
  if (height < cfg.crop_height || width < cfg.crop_width) {
    std::ostringstream msg;
    msg << "frame " << height << "x" << width << " is smaller than the " << cfg.crop_height << "x"
        << cfg.crop_width << " crop";
    throw DataError(msg.str());
  }
  return {(width - cfg.crop_width) / 2, (height - cfg.crop_height) / 2, cfg.crop_width, cfg.crop_height};
}

CameraIntrinsics preprocess_intrinsics(const CameraIntrinsics& k, const PreprocessConfig& cfg) {
  const auto win = crop_window(cfg, k.height, k.width);
  auto out = k.cropped(win.x0, win.y0, win.width, win.height);
  if (win.width != cfg.out_width || win.height != cfg.out_height) out = out.resized(cfg.out_width, cfg.out_height);
  return out;
}

PreprocessedFrame preprocess(const torch::Tensor& raw, const CameraIntrinsics& k, const PreprocessConfig& cfg) {
  TORCH_CHECK(raw.dim() == 3, "preprocess expects C x H x W");
  if (raw.size(1) != k.height || raw.size(2) != k.width) {
    std::ostringstream msg;
    msg << "frame " << raw.size(1) << "x" << raw.size(2) << " does not match intrinsics " << k.height << "x"
        << k.width;
    throw DataError(msg.str());
  }
  const auto win = crop_window(cfg, raw.size(1), raw.size(2));
  auto image = raw.slice(1, win.y0, win.y0 + win.height).slice(2, win.x0, win.x0 + win.width);
  if (win.width != cfg.out_width || win.height != cfg.out_height) {
    image = F::interpolate(image.unsqueeze(0), F::InterpolateFuncOptions()
                                                   .size(std::vector<int64_t>{cfg.out_height, cfg.out_width})
                                                   .mode(torch::kBilinear)
                                                   .align_corners(false))
                .squeeze(0);
  }
  return {image.contiguous(), preprocess_intrinsics(k, cfg)};
}

StubTranslator::StubTranslator(StubTranslatorConfig cfg) : cfg_(cfg) {}

torch::Tensor StubTranslator::translate(const torch::Tensor& day, int64_t frame_index) const {
  TORCH_CHECK(day.dim() == 3 && day.size(0) == 3, "translator expects 3 x H x W");
  const auto height = day.size(1);
  const auto width = day.size(2);
  auto gray = (0.299 * day[0] + 0.587 * day[1] + 0.114 * day[2]).unsqueeze(0);
  auto x = (gray + cfg_.saturation * (day - gray)).clamp_min(0.0).pow(cfg_.gamma);

  // Light glows sit at fixed image positions for a given seed.
  std::mt19937_64 rng(mix_seed(cfg_.seed, 0x6c69676874ULL));
  std::uniform_real_distribution<double> ux(0.1, 0.9);
  std::uniform_real_distribution<double> uy(0.05, 0.5);
  auto u = torch::arange(width, torch::kFloat32).view({1, width});
  auto v = torch::arange(height, torch::kFloat32).view({height, 1});
  const double sigma = cfg_.light_radius * static_cast<double>(width);
  auto glow = torch::zeros({height, width});
  for (int i = 0; i < cfg_.light_sources; ++i) {
    const double px = ux(rng) * static_cast<double>(width);
    const double py = uy(rng) * static_cast<double>(height);
    glow += torch::exp(-((u - px).square() + (v - py).square()) / (2.0 * sigma * sigma));
  }
  auto warm = torch::tensor({1.0f, 0.8f, 0.5f}).view({3, 1, 1});
  x = x + cfg_.light_amplitude * warm * glow.unsqueeze(0);

  auto gen = at::make_generator<at::CPUGeneratorImpl>(mix_seed(cfg_.seed, static_cast<uint64_t>(frame_index)));
  x = x + cfg_.noise_sigma * torch::randn(day.sizes(), gen, torch::kFloat32);
  return x.clamp(0.0, 1.0).contiguous();
}

ExternalDirTranslator::ExternalDirTranslator(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_)) throw DataError("translation directory not found: " + dir_.string());
}

torch::Tensor ExternalDirTranslator::translate(const torch::Tensor& day, int64_t frame_index) const {
  auto night = read_png(dir_ / frame_name(frame_index, ".png"));
  if (night.sizes() != day.sizes()) {
    throw DataError("translated frame " + frame_name(frame_index, ".png") + " does not match the day frame size");
  }
  return night;
}

torch::Tensor approximate_day_from_night(const torch::Tensor& night, const StubTranslatorConfig& cfg) {
  auto x = night.clamp(0.0, 1.0).pow(1.0 / cfg.gamma);
  auto gray = (0.299 * x[0] + 0.587 * x[1] + 0.114 * x[2]).unsqueeze(0);
  return (gray + (x - gray) / cfg.saturation).clamp(0.0, 1.0).contiguous();
}

}  // namespace allday
