#pragma once

#include "allday/data.hpp"
#include "allday/geometry.hpp"

#include <torch/torch.h>

#include <array>
#include <deque>
#include <filesystem>
#include <future>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace allday {

/// Which images fill the two halves of the network input pair.
enum class PairMode { kDayNight, kDayDay, kNightNight };

PairMode parse_pair_mode(const std::string& name);
std::string to_string(PairMode mode);

struct DatasetConfig {
  PreprocessConfig preprocess = PreprocessConfig::desk();
  PairMode pair_mode = PairMode::kDayNight;
  /// "stub", "external" (the sequence's night/ folder) or "external:<dir>".
  std::string translator = "stub";
  uint64_t translator_seed = 0;
  /// Frames outside [first_frame, end_frame) are ignored; end_frame < 0 means all.
  int64_t first_frame = 0;
  int64_t end_frame = -1;
};

std::unique_ptr<NightTranslator> make_translator(const std::string& spec, const std::filesystem::path& sequence_dir,
                                                 uint64_t seed);

/// A target frame with its two temporal neighbours, in both domains.
/// Index 0 is the target, 1 the previous frame, 2 the next frame.
struct FrameSample {
  std::array<torch::Tensor, 3> day;
  std::array<torch::Tensor, 3> night;
  int64_t frame_index = 0;
};

struct Batch {
  torch::Tensor day_target;    // B x 3 x H x W
  torch::Tensor night_target;  // B x 3 x H x W
  std::array<torch::Tensor, 2> day_sources;
  std::array<torch::Tensor, 2> night_sources;
  CameraIntrinsics intrinsics;
  std::vector<int64_t> frame_indices;
  std::vector<size_t> sample_indices;
};

/// One sequence directory:
///   frames/%06d.png, night/%06d.png (optional), depth/%06d.bin (optional),
///   intrinsics.txt, poses.txt (optional).
/// Samples are immutable values; concurrent reads are safe.
class SequenceDataset {
 public:
  SequenceDataset(std::filesystem::path dir, DatasetConfig cfg);

  const std::filesystem::path& dir() const { return dir_; }
  const DatasetConfig& config() const { return cfg_; }

  /// Number of frames with both neighbours present.
  size_t size() const { return targets_.size(); }
  FrameSample sample(size_t i) const;
  Batch batch(std::span<const size_t> indices) const;

  /// All frame indices present in range, ascending.
  const std::vector<int64_t>& frames() const { return frames_; }
  bool has_depth(int64_t frame_index) const;

  torch::Tensor raw_frame(int64_t frame_index) const;
  /// Preprocessed (day, night) pair of one frame under the configured pair mode.
  std::pair<torch::Tensor, torch::Tensor> pair(int64_t frame_index) const;
  /// Ground-truth depth cropped like the images but kept at raw resolution.
  torch::Tensor ground_truth_depth(int64_t frame_index) const;

  const CameraIntrinsics& raw_intrinsics() const { return raw_k_; }
  const CameraIntrinsics& intrinsics() const { return k_; }
  const NightTranslator& translator() const { return *translator_; }

 private:
  std::filesystem::path dir_;
  DatasetConfig cfg_;
  CameraIntrinsics raw_k_;
  CameraIntrinsics k_;
  std::vector<int64_t> frames_;
  std::vector<int64_t> targets_;
  std::unique_ptr<NightTranslator> translator_;
};

/// Yields batches for a fixed list of index groups, in order. With workers > 0
/// up to `workers` batches are assembled ahead on background threads.
class BatchLoader {
 public:
  BatchLoader(const SequenceDataset& dataset, std::vector<std::vector<size_t>> groups, int workers = 0);

  std::optional<Batch> next();

 private:
  void refill();

  const SequenceDataset& dataset_;
  std::vector<std::vector<size_t>> groups_;
  size_t issued_ = 0;
  int workers_;
  std::deque<std::future<Batch>> pending_;
};

}  // namespace allday
