#include "allday/dataset.hpp"

#include "allday/errors.hpp"
#include "allday/image_io.hpp"

#include <algorithm>
#include <iostream>
#include <set>

namespace allday {

namespace fs = std::filesystem;

PairMode parse_pair_mode(const std::string& name) {
  if (name == "day-night" || name == "day_night") return PairMode::kDayNight;
  if (name == "day-day" || name == "day_day") return PairMode::kDayDay;
  if (name == "night-night" || name == "night_night") return PairMode::kNightNight;
  throw ConfigError("unknown pair mode '" + name + "'");
}

std::string to_string(PairMode mode) {
  switch (mode) {
    case PairMode::kDayNight: return "day-night";
    case PairMode::kDayDay: return "day-day";
    case PairMode::kNightNight: return "night-night";
  }
  return "?";
}

std::unique_ptr<NightTranslator> make_translator(const std::string& spec, const fs::path& sequence_dir,
                                                 uint64_t seed) {
  if (spec == "stub") return std::make_unique<StubTranslator>(StubTranslatorConfig{.seed = seed});
  if (spec == "external") return std::make_unique<ExternalDirTranslator>(sequence_dir / "night");
  if (spec.rfind("external:", 0) == 0) return std::make_unique<ExternalDirTranslator>(spec.substr(9));
  throw ConfigError("unknown translator '" + spec + "' (expected stub, external or external:<dir>)");
}

namespace {

std::optional<int64_t> parse_frame_stem(const fs::path& p) {
  if (p.extension() != ".png") return std::nullopt;
  const auto stem = p.stem().string();
  if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  return std::stoll(stem);
}

}  // namespace

SequenceDataset::SequenceDataset(fs::path dir, DatasetConfig cfg) : dir_(std::move(dir)), cfg_(std::move(cfg)) {
  if (!fs::is_directory(dir_ / "frames")) throw DataError("no frames/ directory in " + dir_.string());
  raw_k_ = read_intrinsics(dir_ / "intrinsics.txt");
  k_ = preprocess_intrinsics(raw_k_, cfg_.preprocess);

  std::set<int64_t> present;
  for (const auto& entry : fs::directory_iterator(dir_ / "frames")) {
    const auto idx = parse_frame_stem(entry.path());
    if (!idx) continue;
    if (*idx < cfg_.first_frame || (cfg_.end_frame >= 0 && *idx >= cfg_.end_frame)) continue;
    present.insert(*idx);
  }
  frames_.assign(present.begin(), present.end());
  for (auto f : frames_) {
    if (present.count(f - 1) && present.count(f + 1)) {
      targets_.push_back(f);
    } else if (f != frames_.front() && f != frames_.back()) {
      std::cerr << "warning: " << dir_.string() << ": frame " << f << " lacks a neighbour, skipped\n";
    }
  }
  translator_ = make_translator(cfg_.translator, dir_, cfg_.translator_seed);
}

bool SequenceDataset::has_depth(int64_t frame_index) const {
  return fs::exists(dir_ / "depth" / frame_name(frame_index, ".bin"));
}

torch::Tensor SequenceDataset::raw_frame(int64_t frame_index) const {
  return read_png(dir_ / "frames" / frame_name(frame_index, ".png"));
}

std::pair<torch::Tensor, torch::Tensor> SequenceDataset::pair(int64_t frame_index) const {
  const auto raw = raw_frame(frame_index);
  const auto& pp = cfg_.preprocess;
  auto day = preprocess(raw, raw_k_, pp).image;
  if (cfg_.pair_mode == PairMode::kDayDay) return {day, day.clone()};
  auto night = preprocess(translator_->translate(raw, frame_index), raw_k_, pp).image;
  if (cfg_.pair_mode == PairMode::kNightNight) return {night.clone(), night};
  return {day, night};
}

FrameSample SequenceDataset::sample(size_t i) const {
  TORCH_CHECK(i < targets_.size(), "sample index ", i, " out of range (", targets_.size(), ")");
  const auto f = targets_[i];
  FrameSample s;
  s.frame_index = f;
  const int64_t order[3] = {f, f - 1, f + 1};
  for (int j = 0; j < 3; ++j) std::tie(s.day[j], s.night[j]) = pair(order[j]);
  return s;
}

Batch SequenceDataset::batch(std::span<const size_t> indices) const {
  TORCH_CHECK(!indices.empty(), "empty batch");
  std::array<std::vector<torch::Tensor>, 3> day;
  std::array<std::vector<torch::Tensor>, 3> night;
  Batch b;
  for (auto i : indices) {
    auto s = sample(i);
    for (int j = 0; j < 3; ++j) {
      day[j].push_back(s.day[j]);
      night[j].push_back(s.night[j]);
    }
    b.frame_indices.push_back(s.frame_index);
    b.sample_indices.push_back(i);
  }
  b.day_target = torch::stack(day[0]);
  b.night_target = torch::stack(night[0]);
  b.day_sources = {torch::stack(day[1]), torch::stack(day[2])};
  b.night_sources = {torch::stack(night[1]), torch::stack(night[2])};
  b.intrinsics = k_;
  return b;
}

torch::Tensor SequenceDataset::ground_truth_depth(int64_t frame_index) const {
  auto depth = read_depth(dir_ / "depth" / frame_name(frame_index, ".bin"));
  if (depth.size(0) != raw_k_.height || depth.size(1) != raw_k_.width) {
    throw DataError("depth " + frame_name(frame_index, ".bin") + " does not match the frame size");
  }
  const auto win = crop_window(cfg_.preprocess, depth.size(0), depth.size(1));
  return depth.slice(0, win.y0, win.y0 + win.height).slice(1, win.x0, win.x0 + win.width).contiguous();
}

BatchLoader::BatchLoader(const SequenceDataset& dataset, std::vector<std::vector<size_t>> groups, int workers)
    : dataset_(dataset), groups_(std::move(groups)), workers_(std::max(workers, 0)) {}

void BatchLoader::refill() {
  while (static_cast<int>(pending_.size()) < workers_ && issued_ < groups_.size()) {
    const auto* group = &groups_[issued_++];
    pending_.push_back(std::async(std::launch::async, [this, group] { return dataset_.batch(*group); }));
  }
}

std::optional<Batch> BatchLoader::next() {
  if (workers_ == 0) {
    if (issued_ >= groups_.size()) return std::nullopt;
    return dataset_.batch(groups_[issued_++]);
  }
  refill();
  if (pending_.empty()) return std::nullopt;
  auto b = pending_.front().get();
  pending_.pop_front();
  refill();
  return b;
}

}  // namespace allday
