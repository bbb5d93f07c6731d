#pragma once

#include <json.hpp>
#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace allday {

inline constexpr uint32_t kCheckpointVersion = 1;

/// Layout: 8-byte magic "ALLDAYCK", uint32 format version, uint64 header
/// length, a JSON header (step, config, tensor directory), then the raw
/// little-endian tensor bytes in directory order.
struct Checkpoint {
  uint32_t version = kCheckpointVersion;
  int64_t step = 0;
  nlohmann::json config;
  std::vector<std::pair<std::string, torch::Tensor>> tensors;

  const torch::Tensor* find(const std::string& name) const;
};

/// Written atomically (temporary file, then rename).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws DataError on a bad magic, unsupported version or truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace allday
