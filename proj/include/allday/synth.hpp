#pragma once

#include "allday/geometry.hpp"

#include <torch/torch.h>

#include <array>
#include <filesystem>
#include <vector>

namespace allday {

using Vec3 = std::array<double, 3>;
using Mat4 = std::array<double, 16>;  // row-major

/// Procedural value-noise texture. `cell` is the coarsest feature size in meters.
struct Texture {
  uint64_t seed = 0;
  double cell = 1.0;
  Vec3 color_a = {0.1, 0.1, 0.1};
  Vec3 color_b = {0.9, 0.9, 0.9};
};

/// Rectangle on the plane z = `z` (world frame), spanning [x0, x1] x [y0, y1].
struct FrontoPlane {
  double z = 10.0;
  double x0 = -1.0, x1 = 1.0;
  double y0 = -1.0, y1 = 1.0;
  Texture texture;
};

struct Box {
  Vec3 lo = {-0.5, -0.5, 5.0};
  Vec3 hi = {0.5, 0.5, 6.0};
  Texture texture;
};

/// Horizontal plane y = `height` (y points down, so positive is below the camera).
struct GroundPlane {
  double height = 1.5;
  Texture texture;
};

/// Camera centre x(i) = A sin(2 pi i / period), z(i) = step * i; yaw oscillates
/// with the same period.
struct Trajectory {
  double forward_step = 0.35;
  double lateral_amplitude = 0.6;
  double period = 24.0;
  double yaw_amplitude = 0.04;
};

struct SceneSpec {
  CameraIntrinsics intrinsics{200.0, 200.0, 159.5, 119.5, 320, 240};
  int supersample = 3;  // per-axis subsamples per pixel
  std::vector<FrontoPlane> planes;
  std::vector<Box> boxes;
  std::vector<GroundPlane> ground;
  Trajectory trajectory;

  /// Street canyon: ground, facades, a far wall, random boxes and billboards.
  static SceneSpec street(uint64_t seed);
  /// One textured plane filling the view at `distance`; sideways motion only.
  static SceneSpec plane(double distance, uint64_t seed = 0);

  /// Camera-to-world transform of frame `index`.
  Mat4 camera_to_world(int64_t index) const;
};

struct RenderedFrame {
  torch::Tensor image;  // 3 x H x W in [0, 1]
  torch::Tensor depth;  // H x W camera-z in meters, 0 where nothing is hit
  Mat4 camera_to_world;
};

RenderedFrame render_frame(const SceneSpec& scene, int64_t index);

/// Writes frames/%06d.png, depth/%06d.bin, intrinsics.txt and poses.txt (one
/// row-major camera-to-world 4x4 per line) for frames [0, n_frames).
void synth_generate(const std::filesystem::path& out_dir, const SceneSpec& scene, int64_t n_frames);

/// Reads poses.txt as an n x 4 x 4 float64 tensor.
torch::Tensor read_poses(const std::filesystem::path& path);

}  // namespace allday
