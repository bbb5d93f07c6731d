#include "allday/synth.hpp"

#include "allday/errors.hpp"
#include "allday/image_io.hpp"
#include "allday/random.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

namespace allday {

namespace {

double hash01(int64_t ix, int64_t iy, uint64_t seed) {
  const auto key = static_cast<uint64_t>(ix) * 0x9E3779B1ULL ^ (static_cast<uint64_t>(iy) << 32 | static_cast<uint64_t>(iy) >> 32);
  return static_cast<double>(mix_seed(seed, key) >> 11) * 0x1.0p-53;
}

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double value_noise(double x, double y, uint64_t seed) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto ix = static_cast<int64_t>(fx);
  const auto iy = static_cast<int64_t>(fy);
  const double tx = fade(x - fx);
  const double ty = fade(y - fy);
  const double a = hash01(ix, iy, seed);
  const double b = hash01(ix + 1, iy, seed);
  const double c = hash01(ix, iy + 1, seed);
  const double d = hash01(ix + 1, iy + 1, seed);
  return (a + (b - a) * tx) * (1.0 - ty) + (c + (d - c) * tx) * ty;
}

Vec3 shade(const Texture& tex, double s, double t) {
  const double x = s / tex.cell;
  const double y = t / tex.cell;
  double f = 0.55 * value_noise(x, y, tex.seed) + 0.30 * value_noise(2.03 * x + 17.1, 2.03 * y - 5.3, tex.seed + 1) +
             0.15 * value_noise(4.1 * x - 31.7, 4.1 * y + 11.9, tex.seed + 2);
  f = std::clamp(0.5 + 2.5 * (f - 0.5), 0.0, 1.0);
  Vec3 out;
  for (int i = 0; i < 3; ++i) out[i] = tex.color_a[i] + (tex.color_b[i] - tex.color_a[i]) * f;
  return out;
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  const Texture* texture = nullptr;
  double s = 0.0;
  double u = 0.0;
};

constexpr double kEps = 1e-9;

void hit_plane(const FrontoPlane& p, const Vec3& o, const Vec3& d, Hit& best) {
  if (std::abs(d[2]) < kEps) return;
  const double t = (p.z - o[2]) / d[2];
  if (t <= kEps || t >= best.t) return;
  const double x = o[0] + t * d[0];
  const double y = o[1] + t * d[1];
  if (x < p.x0 || x > p.x1 || y < p.y0 || y > p.y1) return;
  best = {t, &p.texture, x, y};
}

void hit_ground(const GroundPlane& g, const Vec3& o, const Vec3& d, Hit& best) {
  if (std::abs(d[1]) < kEps) return;
  const double t = (g.height - o[1]) / d[1];
  if (t <= kEps || t >= best.t) return;
  best = {t, &g.texture, o[0] + t * d[0], o[2] + t * d[2]};
}

void hit_box(const Box& b, const Vec3& o, const Vec3& d, Hit& best) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int axis = -1;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < kEps) {
      if (o[i] < b.lo[i] || o[i] > b.hi[i]) return;
      continue;
    }
    double t0 = (b.lo[i] - o[i]) / d[i];
    double t1 = (b.hi[i] - o[i]) / d[i];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_near) {
      t_near = t0;
      axis = i;
    }
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far || t_near <= kEps || t_near >= best.t || axis < 0) return;
  const Vec3 p = {o[0] + t_near * d[0], o[1] + t_near * d[1], o[2] + t_near * d[2]};
  switch (axis) {
    case 0: best = {t_near, &b.texture, p[2], p[1]}; break;
    case 1: best = {t_near, &b.texture, p[0], p[2]}; break;
    default: best = {t_near, &b.texture, p[0], p[1]}; break;
  }
}

Hit trace(const SceneSpec& scene, const Vec3& o, const Vec3& d) {
  Hit best;
  for (const auto& p : scene.planes) hit_plane(p, o, d, best);
  for (const auto& g : scene.ground) hit_ground(g, o, d, best);
  for (const auto& b : scene.boxes) hit_box(b, o, d, best);
  return best;
}

Texture random_texture(std::mt19937_64& rng, double cell) {
  std::uniform_real_distribution<double> dark(0.0, 0.25);
  std::uniform_real_distribution<double> light(0.7, 1.0);
  Texture t;
  t.seed = rng();
  t.cell = cell;
  for (int i = 0; i < 3; ++i) {
    t.color_a[i] = dark(rng);
    t.color_b[i] = light(rng);
  }
  return t;
}

}  // namespace

SceneSpec SceneSpec::street(uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x5ce4e));
  SceneSpec s;
  s.ground.push_back({1.5, random_texture(rng, 0.8)});
  s.planes.push_back({60.0, -120.0, 120.0, -60.0, 1.5, random_texture(rng, 4.0)});
  s.boxes.push_back({{-14.0, -10.0, -5.0}, {-4.5, 1.5, 80.0}, random_texture(rng, 0.7)});
  s.boxes.push_back({{4.5, -10.0, -5.0}, {14.0, 1.5, 80.0}, random_texture(rng, 0.7)});

  std::uniform_real_distribution<double> bx(-3.5, 3.5);
  std::uniform_real_distribution<double> bz(12.0, 32.0);
  std::uniform_real_distribution<double> size(0.6, 1.8);
  for (int i = 0; i < 6; ++i) {
    const double cx = bx(rng);
    const double cz = bz(rng);
    const double w = size(rng);
    const double h = size(rng) * 1.2;
    s.boxes.push_back({{cx - w / 2, 1.5 - h, cz - w / 2}, {cx + w / 2, 1.5, cz + w / 2}, random_texture(rng, 0.4)});
  }
  std::uniform_real_distribution<double> pz(18.0, 40.0);
  std::uniform_real_distribution<double> pw(2.0, 5.0);
  for (int i = 0; i < 3; ++i) {
    const double z = pz(rng);
    const double cx = bx(rng);
    const double w = pw(rng);
    s.planes.push_back({z, cx - w / 2, cx + w / 2, -3.0 - w / 3, -0.5, random_texture(rng, 0.8)});
  }
  return s;
}

SceneSpec SceneSpec::plane(double distance, uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x91a4e));
  SceneSpec s;
  s.planes.push_back({distance, -1e4, 1e4, -1e4, 1e4, random_texture(rng, 0.05 * distance)});
  s.trajectory = {0.0, 0.5, 24.0, 0.0};
  return s;
}

Mat4 SceneSpec::camera_to_world(int64_t index) const {
  const double phase = 2.0 * std::numbers::pi * static_cast<double>(index) / trajectory.period;
  const double yaw = trajectory.yaw_amplitude * std::sin(phase + 0.5);
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const double x = trajectory.lateral_amplitude * std::sin(phase);
  const double z = trajectory.forward_step * static_cast<double>(index);
  return {c, 0.0, s, x, 0.0, 1.0, 0.0, 0.0, -s, 0.0, c, z, 0.0, 0.0, 0.0, 1.0};
}

RenderedFrame render_frame(const SceneSpec& scene, int64_t index) {
  const auto& k = scene.intrinsics;
  const auto m = scene.camera_to_world(index);
  const Vec3 origin = {m[3], m[7], m[11]};
  auto ray = [&](double u, double v) {
    const double dx = (u - k.cx) / k.fx;
    const double dy = (v - k.cy) / k.fy;
    return Vec3{m[0] * dx + m[1] * dy + m[2], m[4] * dx + m[5] * dy + m[6], m[8] * dx + m[9] * dy + m[10]};
  };

  auto image = torch::zeros({3, k.height, k.width}, torch::kFloat32);
  auto depth = torch::zeros({k.height, k.width}, torch::kFloat32);
  auto img = image.accessor<float, 3>();
  auto dep = depth.accessor<float, 2>();
  const int ss = std::max(scene.supersample, 1);
  const double weight = 1.0 / static_cast<double>(ss * ss);
  for (int64_t v = 0; v < k.height; ++v) {
    for (int64_t u = 0; u < k.width; ++u) {
      Vec3 rgb = {0.0, 0.0, 0.0};
      for (int sy = 0; sy < ss; ++sy) {
        for (int sx = 0; sx < ss; ++sx) {
          const double du = (sx + 0.5) / ss - 0.5;
          const double dv = (sy + 0.5) / ss - 0.5;
          const auto hit = trace(scene, origin, ray(static_cast<double>(u) + du, static_cast<double>(v) + dv));
          if (!hit.texture) continue;
          const auto c = shade(*hit.texture, hit.s, hit.u);
          for (int i = 0; i < 3; ++i) rgb[i] += weight * c[i];
        }
      }
      for (int i = 0; i < 3; ++i) img[i][v][u] = static_cast<float>(rgb[i]);
      // Camera-space rays have unit z, so the hit parameter is the depth.
      const auto center = trace(scene, origin, ray(static_cast<double>(u), static_cast<double>(v)));
      dep[v][u] = center.texture ? static_cast<float>(center.t) : 0.0f;
    }
  }
  return {image, depth, m};
}

void synth_generate(const std::filesystem::path& out_dir, const SceneSpec& scene, int64_t n_frames) {
  if (n_frames < 3) throw ConfigError("synthetic sequences need at least 3 frames");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "frames");
  fs::create_directories(out_dir / "depth");
  write_intrinsics(out_dir / "intrinsics.txt", scene.intrinsics);
  std::ostringstream poses;
  poses << std::setprecision(17);
  for (int64_t i = 0; i < n_frames; ++i) {
    const auto frame = render_frame(scene, i);
    write_png(out_dir / "frames" / frame_name(i, ".png"), frame.image);
    write_depth(out_dir / "depth" / frame_name(i, ".bin"), frame.depth);
    for (size_t j = 0; j < 16; ++j) poses << frame.camera_to_world[j] << (j + 1 < 16 ? ' ' : '\n');
  }
  write_file_atomically(out_dir / "poses.txt", poses.str());
}

torch::Tensor read_poses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<double> values;
  std::string line;
  int64_t rows = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double x = 0.0;
    int count = 0;
    while (ls >> x) {
      values.push_back(x);
      ++count;
    }
    if (count != 16) throw DataError(path.string() + ": pose line " + std::to_string(rows + 1) + " needs 16 values");
    ++rows;
  }
  return torch::tensor(values, torch::kFloat64).view({rows, 4, 4});
}

}  // namespace allday
