#pragma once

#include "allday/geometry.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <memory>
#include <string>

namespace allday {

/// Center crop followed by a bilinear resize.
struct PreprocessConfig {
  bool crop = true;
  int64_t crop_height = 640;
  int64_t crop_width = 1280;
  int64_t out_height = 256;
  int64_t out_width = 512;

  /// 960 x 1280 camera frames -> 640 x 1280 -> 256 x 512.
  static PreprocessConfig paper() { return {}; }
  /// 240 x 320 synthetic frames -> 192 x 320 -> 96 x 160.
  static PreprocessConfig desk() { return {true, 192, 320, 96, 160}; }
};

struct CropWindow {
  int64_t x0 = 0;
  int64_t y0 = 0;
  int64_t width = 0;
  int64_t height = 0;
};

/// Crop window for a raw height x width frame. Throws DataError if the frame
/// is smaller than the crop.
CropWindow crop_window(const PreprocessConfig& cfg, int64_t height, int64_t width);

struct PreprocessedFrame {
  torch::Tensor image;  // 3 x out_height x out_width
  CameraIntrinsics intrinsics;
};

/// Crops and resizes a raw 3 x H x W frame and rescales its intrinsics to match.
PreprocessedFrame preprocess(const torch::Tensor& raw, const CameraIntrinsics& k, const PreprocessConfig& cfg);
CameraIntrinsics preprocess_intrinsics(const CameraIntrinsics& k, const PreprocessConfig& cfg);

/// Day-to-night image translation. Implementations are photometric only:
/// the output is pixel-aligned with the input.
class NightTranslator {
 public:
  virtual ~NightTranslator() = default;
  /// day: 3 x H x W raw frame with the given sequence index.
  virtual torch::Tensor translate(const torch::Tensor& day, int64_t frame_index) const = 0;
  virtual std::string name() const = 0;
};

struct StubTranslatorConfig {
  uint64_t seed = 0;
  double gamma = 2.2;
  double saturation = 0.5;
  double noise_sigma = 0.02;
  int light_sources = 3;
  double light_amplitude = 0.25;
  double light_radius = 0.06;  // fraction of image width
};

/// Synthetic night rendering: desaturation, gamma darkening, fixed image-space
/// light glows and per-frame Gaussian noise. Deterministic in (seed, frame).
class StubTranslator final : public NightTranslator {
 public:
  explicit StubTranslator(StubTranslatorConfig cfg = {});
  torch::Tensor translate(const torch::Tensor& day, int64_t frame_index) const override;
  std::string name() const override { return "stub"; }

 private:
  StubTranslatorConfig cfg_;
};

/// Pre-translated frames read from `<dir>/%06d.png`.
class ExternalDirTranslator final : public NightTranslator {
 public:
  explicit ExternalDirTranslator(std::filesystem::path dir);
  torch::Tensor translate(const torch::Tensor& day, int64_t frame_index) const override;
  std::string name() const override { return "external:" + dir_.string(); }

 private:
  std::filesystem::path dir_;
};

/// Rough inverse of the stub (gamma lift, re-saturation), used to build the
/// day half of a pair when the input is a night image.
torch::Tensor approximate_day_from_night(const torch::Tensor& night, const StubTranslatorConfig& cfg = {});

}  // namespace allday
