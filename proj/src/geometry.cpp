#include "allday/geometry.hpp"

#include "allday/errors.hpp"
#include "allday/key_value.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace allday {

namespace F = torch::nn::functional;

void CameraIntrinsics::validate() const {
  std::ostringstream why;
  if (!(fx > 0.0) || !(fy > 0.0)) why << "focal lengths must be positive (fx=" << fx << ", fy=" << fy << ")";
  else if (width <= 0 || height <= 0) why << "image size must be positive";
  else if (!(cx >= 0.0 && cx < static_cast<double>(width)) || !(cy >= 0.0 && cy < static_cast<double>(height)))
    why << "principal point (" << cx << ", " << cy << ") outside " << width << "x" << height;
  if (!why.str().empty()) throw ConfigError("invalid intrinsics: " + why.str());
}

torch::Tensor CameraIntrinsics::matrix(torch::TensorOptions options) const {
  return torch::tensor({fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0}, torch::kFloat64).view({3, 3}).to(options);
}

CameraIntrinsics CameraIntrinsics::cropped(int64_t x0, int64_t y0, int64_t w, int64_t h) const {
  CameraIntrinsics out = *this;
  out.cx -= static_cast<double>(x0);
  out.cy -= static_cast<double>(y0);
  out.width = w;
  out.height = h;
  return out;
}

CameraIntrinsics CameraIntrinsics::resized(int64_t new_width, int64_t new_height) const {
  // Pixel centers map as (x + 0.5) * s - 0.5, matching half-pixel bilinear resize.
  const double sx = static_cast<double>(new_width) / static_cast<double>(width);
  const double sy = static_cast<double>(new_height) / static_cast<double>(height);
  CameraIntrinsics out = *this;
  out.fx *= sx;
  out.fy *= sy;
  out.cx = (cx + 0.5) * sx - 0.5;
  out.cy = (cy + 0.5) * sy - 0.5;
  out.width = new_width;
  out.height = new_height;
  return out;
}

CameraIntrinsics read_intrinsics(const std::filesystem::path& path) {
  const auto kv = read_key_values(path);
  const auto origin = path.string();
  CameraIntrinsics k;
  k.fx = kv_double(kv, "fx", origin);
  k.fy = kv_double(kv, "fy", origin);
  k.cx = kv_double(kv, "cx", origin);
  k.cy = kv_double(kv, "cy", origin);
  k.width = kv_int(kv, "width", origin);
  k.height = kv_int(kv, "height", origin);
  try {
    k.validate();
  } catch (const ConfigError& e) {
    throw DataError(origin + ": " + e.what());
  }
  return k;
}

void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& k) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << std::setprecision(17);
  out << "fx=" << k.fx << "\nfy=" << k.fy << "\ncx=" << k.cx << "\ncy=" << k.cy << "\nwidth=" << k.width
      << "\nheight=" << k.height << "\n";
}

PoseTransform PoseTransform::identity(int64_t batch, torch::TensorOptions options) {
  return {torch::zeros({batch, 3}, options), torch::zeros({batch, 3}, options)};
}

PoseTransform PoseTransform::from_values(std::array<double, 3> axis_angle, std::array<double, 3> translation,
                                         torch::TensorOptions options) {
  auto w = torch::tensor({axis_angle[0], axis_angle[1], axis_angle[2]}, torch::kFloat64).view({1, 3});
  auto t = torch::tensor({translation[0], translation[1], translation[2]}, torch::kFloat64).view({1, 3});
  return {w.to(options), t.to(options)};
}

namespace {

// B x 3 -> B x 3 x 3 cross-product matrices.
torch::Tensor skew(const torch::Tensor& w) {
  auto x = w.select(1, 0);
  auto y = w.select(1, 1);
  auto z = w.select(1, 2);
  auto o = torch::zeros_like(x);
  return torch::stack({o, -z, y, z, o, -x, -y, x, o}, 1).view({-1, 3, 3});
}

}  // namespace

torch::Tensor pose_to_matrix(const PoseTransform& pose) {
  const auto& w = pose.axis_angle;
  TORCH_CHECK(w.dim() == 2 && w.size(1) == 3, "axis_angle must be B x 3");
  TORCH_CHECK(pose.translation.sizes() == w.sizes(), "translation must match axis_angle shape");

  auto theta2 = (w * w).sum(1, /*keepdim=*/true).unsqueeze(-1);  // B x 1 x 1
  // Below this threshold the fourth-order series is exact to double precision.
  auto small = theta2 < 1e-4;
  auto safe_theta2 = torch::where(small, torch::ones_like(theta2), theta2);
  auto theta = safe_theta2.sqrt();
  auto half_sin = torch::sin(theta * 0.5);
  auto a_exact = torch::sin(theta) / theta;
  auto b_exact = 2.0 * half_sin * half_sin / safe_theta2;
  auto theta4 = theta2 * theta2;
  auto a_series = 1.0 - theta2 / 6.0 + theta4 / 120.0;
  auto b_series = 0.5 - theta2 / 24.0 + theta4 / 720.0;
  auto a = torch::where(small, a_series, a_exact);
  auto b = torch::where(small, b_series, b_exact);

  auto k = skew(w);
  auto eye = torch::eye(3, w.options()).expand_as(k);
  auto rot = eye + a * k + b * k.bmm(k);

  const auto batch = w.size(0);
  auto top = torch::cat({rot, pose.translation.unsqueeze(-1)}, 2);  // B x 3 x 4
  auto bottom = torch::tensor({0.0, 0.0, 0.0, 1.0}, w.options()).view({1, 1, 4}).expand({batch, 1, 4});
  return torch::cat({top, bottom}, 1);
}

torch::Tensor invert_rigid(const torch::Tensor& transform) {
  TORCH_CHECK(transform.dim() == 3 && transform.size(1) == 4 && transform.size(2) == 4,
              "transform must be B x 4 x 4");
  auto rt = transform.slice(1, 0, 3).slice(2, 0, 3).transpose(1, 2);
  auto t = transform.slice(1, 0, 3).slice(2, 3, 4);
  auto top = torch::cat({rt, -rt.bmm(t)}, 2);
  return torch::cat({top, transform.slice(1, 3, 4)}, 1);
}

PoseTransform matrix_to_pose(const torch::Tensor& transform) {
  TORCH_CHECK(transform.dim() == 3 && transform.size(1) == 4 && transform.size(2) == 4,
              "transform must be B x 4 x 4");
  auto m = transform.detach().to(torch::kFloat64).contiguous();
  const auto batch = m.size(0);
  auto w = torch::zeros({batch, 3}, torch::kFloat64);
  auto t = torch::zeros({batch, 3}, torch::kFloat64);
  auto ma = m.accessor<double, 3>();
  auto wa = w.accessor<double, 2>();
  auto ta = t.accessor<double, 2>();
  for (int64_t b = 0; b < batch; ++b) {
    auto r = [&](int i, int j) { return ma[b][i][j]; };
    const double cos_theta = std::clamp((r(0, 0) + r(1, 1) + r(2, 2) - 1.0) * 0.5, -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    const double vx = r(2, 1) - r(1, 2);
    const double vy = r(0, 2) - r(2, 0);
    const double vz = r(1, 0) - r(0, 1);
    if (theta < 1e-6) {
      wa[b][0] = 0.5 * vx;
      wa[b][1] = 0.5 * vy;
      wa[b][2] = 0.5 * vz;
    } else if (std::numbers::pi - theta < 1e-4) {
      // sin(theta) ~ 0: recover the axis from the symmetric part R = 2aa^T - I.
      double ax = std::sqrt(std::max(0.0, (r(0, 0) + 1.0) * 0.5));
      double ay = std::sqrt(std::max(0.0, (r(1, 1) + 1.0) * 0.5));
      double az = std::sqrt(std::max(0.0, (r(2, 2) + 1.0) * 0.5));
      if (ax >= ay && ax >= az) {
        ay = std::copysign(ay, r(0, 1));
        az = std::copysign(az, r(0, 2));
      } else if (ay >= az) {
        ax = std::copysign(ax, r(0, 1));
        az = std::copysign(az, r(1, 2));
      } else {
        ax = std::copysign(ax, r(0, 2));
        ay = std::copysign(ay, r(1, 2));
      }
      const double n = std::sqrt(ax * ax + ay * ay + az * az);
      wa[b][0] = theta * ax / n;
      wa[b][1] = theta * ay / n;
      wa[b][2] = theta * az / n;
    } else {
      const double s = theta / (2.0 * std::sin(theta));
      wa[b][0] = s * vx;
      wa[b][1] = s * vy;
      wa[b][2] = s * vz;
    }
    for (int i = 0; i < 3; ++i) ta[b][i] = r(i, 3);
  }
  return {w.to(transform.dtype()), t.to(transform.dtype())};
}

namespace {

// 1 x 1 x H x W pixel index planes (u along width, v along height).
std::pair<torch::Tensor, torch::Tensor> pixel_lattice(int64_t height, int64_t width, torch::TensorOptions options) {
  auto u = torch::arange(width, options).view({1, 1, 1, width}).expand({1, 1, height, width});
  auto v = torch::arange(height, options).view({1, 1, height, 1}).expand({1, 1, height, width});
  return {u, v};
}

}  // namespace

torch::Tensor backproject(const torch::Tensor& depth, const CameraIntrinsics& k) {
  TORCH_CHECK(depth.dim() == 4 && depth.size(1) == 1, "depth must be B x 1 x H x W");
  if ((depth <= 0).any().item<bool>()) {
    throw std::domain_error("backproject: depth must be strictly positive");
  }
  auto [u, v] = pixel_lattice(depth.size(2), depth.size(3), depth.options());
  auto x = (u - k.cx) / k.fx * depth;
  auto y = (v - k.cy) / k.fy * depth;
  return torch::cat({x, y, depth}, 1);
}

torch::Tensor transform_points(const torch::Tensor& transform, const torch::Tensor& points) {
  TORCH_CHECK(points.dim() == 4 && points.size(1) == 3, "points must be B x 3 x H x W");
  TORCH_CHECK(transform.dim() == 3 && transform.size(0) == points.size(0), "transform must be B x 4 x 4");
  const auto batch = points.size(0);
  auto flat = points.reshape({batch, 3, -1});
  auto rot = transform.slice(1, 0, 3).slice(2, 0, 3);
  auto t = transform.slice(1, 0, 3).slice(2, 3, 4);
  return (rot.bmm(flat) + t).view(points.sizes());
}

PixelGrid project(const torch::Tensor& points, const CameraIntrinsics& k) {
  TORCH_CHECK(points.dim() == 4 && points.size(1) == 3, "points must be B x 3 x H x W");
  auto x = points.slice(1, 0, 1);
  auto y = points.slice(1, 1, 2);
  auto z = points.slice(1, 2, 3);
  auto in_front = z > kMinProjectedDepth;
  auto zc = z.clamp_min(kMinProjectedDepth);
  auto u = k.fx * x / zc + k.cx;
  auto v = k.fy * y / zc + k.cy;
  auto inside = (u >= -kEdgeTolerance) & (u <= k.width - 1 + kEdgeTolerance) & (v >= -kEdgeTolerance) &
                (v <= k.height - 1 + kEdgeTolerance);
  return {torch::cat({u, v}, 1), in_front & inside};
}

Warped bilinear_sample(const torch::Tensor& source, const PixelGrid& grid) {
  TORCH_CHECK(source.dim() == 4, "source must be B x C x H x W");
  TORCH_CHECK(grid.coords.dim() == 4 && grid.coords.size(1) == 2, "grid coords must be B x 2 x H x W");
  TORCH_CHECK(grid.coords.size(0) == source.size(0), "grid batch ", grid.coords.size(0), " does not match source ",
              source.sizes());
  const auto batch = source.size(0);
  const auto channels = source.size(1);
  const auto height = source.size(2);
  const auto width = source.size(3);

  auto u = grid.coords.select(1, 0);
  auto v = grid.coords.select(1, 1);
  auto inside = (u >= -kEdgeTolerance) & (u <= width - 1 + kEdgeTolerance) & (v >= -kEdgeTolerance) &
                (v <= height - 1 + kEdgeTolerance);
  auto uc = u.clamp(0.0, static_cast<double>(width - 1));
  auto vc = v.clamp(0.0, static_cast<double>(height - 1));
  // NaN coordinates must not reach the integer gather; they still poison the weights.
  auto x0 = torch::nan_to_num(uc.detach(), 0.0).floor().clamp(0.0, static_cast<double>(std::max<int64_t>(width - 2, 0)));
  auto y0 = torch::nan_to_num(vc.detach(), 0.0).floor().clamp(0.0, static_cast<double>(std::max<int64_t>(height - 2, 0)));
  auto wx = (uc - x0).unsqueeze(1);
  auto wy = (vc - y0).unsqueeze(1);

  auto ix0 = x0.to(torch::kLong);
  auto iy0 = y0.to(torch::kLong);
  auto ix1 = (ix0 + 1).clamp_max(width - 1);
  auto iy1 = (iy0 + 1).clamp_max(height - 1);

  auto flat = source.reshape({batch, channels, height * width});
  auto tap = [&](const torch::Tensor& iy, const torch::Tensor& ix) {
    auto index = (iy * width + ix).view({batch, 1, -1}).expand({batch, channels, -1});
    return flat.gather(2, index).view({batch, channels, grid.coords.size(2), grid.coords.size(3)});
  };
  auto out = (1.0 - wx) * (1.0 - wy) * tap(iy0, ix0) + wx * (1.0 - wy) * tap(iy0, ix1) +
             (1.0 - wx) * wy * tap(iy1, ix0) + wx * wy * tap(iy1, ix1);

  auto valid = inside.unsqueeze(1);
  if (grid.valid.defined()) valid = valid & grid.valid;
  return {out, valid};
}

Warped reproject(const torch::Tensor& source, const torch::Tensor& target_depth, const torch::Tensor& transform,
                 const CameraIntrinsics& k) {
  TORCH_CHECK(source.dim() == 4 && target_depth.dim() == 4, "source and depth must be 4-D");
  TORCH_CHECK(source.size(0) == target_depth.size(0) && source.size(2) == target_depth.size(2) &&
                  source.size(3) == target_depth.size(3),
              "source ", source.sizes(), " and depth ", target_depth.sizes(), " disagree");
  auto points = transform_points(transform, backproject(target_depth, k));
  return bilinear_sample(source, project(points, k));
}

Warped reproject(const torch::Tensor& source, const torch::Tensor& target_depth, const PoseTransform& pose,
                 const CameraIntrinsics& k) {
  return reproject(source, target_depth, pose_to_matrix(pose), k);
}

}  // namespace allday
