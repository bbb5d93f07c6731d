#pragma once

#include <torch/torch.h>

#include <array>
#include <filesystem>

namespace allday {

/// Pinhole intrinsics in pixel units for an image of `width` x `height`.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int64_t width = 1;
  int64_t height = 1;

  /// Throws ConfigError unless fx, fy > 0 and the principal point lies in the image.
  void validate() const;

  /// 3x3 K matrix.
  torch::Tensor matrix(torch::TensorOptions options = torch::kFloat64) const;

  /// Intrinsics after taking the window [x0, x0+w) x [y0, y0+h).
  CameraIntrinsics cropped(int64_t x0, int64_t y0, int64_t w, int64_t h) const;

  /// Intrinsics after a pixel-center-aligned resize to new_width x new_height.
  CameraIntrinsics resized(int64_t new_width, int64_t new_height) const;

  bool operator==(const CameraIntrinsics&) const = default;
};

/// Reads the key=value intrinsics file (fx, fy, cx, cy, width, height).
CameraIntrinsics read_intrinsics(const std::filesystem::path& path);
void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& k);

/// Rigid motion taking target-camera points into the source camera.
/// axis_angle and translation are B x 3 and may require grad.
struct PoseTransform {
  torch::Tensor axis_angle;
  torch::Tensor translation;

  static PoseTransform identity(int64_t batch, torch::TensorOptions options = torch::kFloat32);
  static PoseTransform from_values(std::array<double, 3> axis_angle,
                                   std::array<double, 3> translation,
                                   torch::TensorOptions options = torch::kFloat32);
};

/// Continuous pixel coordinates (B x 2 x H x W, channel 0 = u, 1 = v) plus a
/// B x 1 x H x W boolean mask of usable samples.
struct PixelGrid {
  torch::Tensor coords;
  torch::Tensor valid;
};

/// An image resampled through a PixelGrid, with its validity mask.
struct Warped {
  torch::Tensor image;
  torch::Tensor valid;
};

inline constexpr double kMinProjectedDepth = 1e-3;
/// Round-off allowance, in pixels, when testing whether a coordinate is inside the image.
inline constexpr double kEdgeTolerance = 1e-6;

/// Rodrigues map to B x 4 x 4 homogeneous transforms. Differentiable at zero rotation.
torch::Tensor pose_to_matrix(const PoseTransform& pose);

/// Closed-form rigid inverse of B x 4 x 4 transforms.
torch::Tensor invert_rigid(const torch::Tensor& transform);

/// Axis-angle/translation of a B x 4 x 4 rigid transform (log map, no grad needed).
PoseTransform matrix_to_pose(const torch::Tensor& transform);

/// Lifts a B x 1 x H x W depth map to camera-frame points B x 3 x H x W.
/// Throws std::domain_error on non-positive depth.
torch::Tensor backproject(const torch::Tensor& depth, const CameraIntrinsics& k);

/// Applies B x 4 x 4 transforms to B x 3 x H x W points.
torch::Tensor transform_points(const torch::Tensor& transform, const torch::Tensor& points);

/// Pinhole projection. Depths at or below kMinProjectedDepth are clamped and
/// masked; coordinates outside [0, W-1] x [0, H-1] (up to kEdgeTolerance) are masked too.
PixelGrid project(const torch::Tensor& points, const CameraIntrinsics& k);

/// Bilinear resampling of `source` at grid coordinates, edge-clamped outside the
/// image. The grid may have any spatial size; the output takes it. Exact at integer coordinates; differentiable in source and coords.
Warped bilinear_sample(const torch::Tensor& source, const PixelGrid& grid);

/// Inverse warp: reconstructs the target view by sampling `source` where the
/// target pixels land after lifting with `target_depth` and moving by `pose`.
Warped reproject(const torch::Tensor& source, const torch::Tensor& target_depth,
                 const PoseTransform& pose, const CameraIntrinsics& k);
Warped reproject(const torch::Tensor& source, const torch::Tensor& target_depth,
                 const torch::Tensor& transform, const CameraIntrinsics& k);

}  // namespace allday
