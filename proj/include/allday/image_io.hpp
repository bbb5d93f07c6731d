#pragma once

#include <torch/torch.h>

#include <filesystem>

namespace allday {

/// 8-bit PNG -> 3 x H x W float32 RGB in [0, 1].
torch::Tensor read_png(const std::filesystem::path& path);
/// 3 x H x W (or 1 x H x W) values in [0, 1] -> 8-bit PNG, rounded.
void write_png(const std::filesystem::path& path, const torch::Tensor& image);

/// Depth files: 8-byte magic "ADDEPTH1", uint32 height, uint32 width (little
/// endian), then height*width little-endian float32 in meters. 0 marks no data.
torch::Tensor read_depth(const std::filesystem::path& path);
void write_depth(const std::filesystem::path& path, const torch::Tensor& depth);

/// Turbo-colormapped inverse depth (near = warm) as 3 x H x W in [0, 1].
torch::Tensor colorize_depth(const torch::Tensor& depth);

/// Writes to a temporary sibling then renames over `path`.
void write_file_atomically(const std::filesystem::path& path, const std::string& bytes);

/// "%06d" file stem used throughout the sequence layout.
std::string frame_name(int64_t index, const std::string& extension);

}  // namespace allday
