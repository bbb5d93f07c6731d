#include "allday/image_io.hpp"

#include "allday/errors.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace allday {

static_assert(std::endian::native == std::endian::little, "depth files assume a little-endian host");

namespace {

constexpr std::array<char, 8> kDepthMagic = {'A', 'D', 'D', 'E', 'P', 'T', 'H', '1'};

}  // namespace

torch::Tensor read_png(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw DataError("cannot read image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  auto t = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8).clone();
  return t.permute({2, 0, 1}).to(torch::kFloat32).div_(255.0).contiguous();
}

void write_png(const std::filesystem::path& path, const torch::Tensor& image) {
  TORCH_CHECK(image.dim() == 3 && (image.size(0) == 3 || image.size(0) == 1), "write_png expects C x H x W");
  auto bytes = image.detach()
                   .to(torch::kFloat32)
                   .clamp(0.0, 1.0)
                   .mul(255.0)
                   .round()
                   .to(torch::kUInt8)
                   .permute({1, 2, 0})
                   .contiguous();
  const int rows = static_cast<int>(bytes.size(0));
  const int cols = static_cast<int>(bytes.size(1));
  cv::Mat out;
  if (image.size(0) == 3) {
    cv::Mat rgb(rows, cols, CV_8UC3, bytes.data_ptr<uint8_t>());
    cv::cvtColor(rgb, out, cv::COLOR_RGB2BGR);
  } else {
    out = cv::Mat(rows, cols, CV_8UC1, bytes.data_ptr<uint8_t>()).clone();
  }
  std::vector<uchar> encoded;
  if (!cv::imencode(".png", out, encoded)) throw DataError("cannot encode " + path.string());
  write_file_atomically(path, std::string(encoded.begin(), encoded.end()));
}

torch::Tensor read_depth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open depth file " + path.string());
  std::array<char, 8> magic{};
  uint32_t dims[2] = {0, 0};
  in.read(magic.data(), magic.size());
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in || magic != kDepthMagic) throw DataError("bad depth header in " + path.string());
  auto depth = torch::empty({static_cast<int64_t>(dims[0]), static_cast<int64_t>(dims[1])}, torch::kFloat32);
  const auto nbytes = static_cast<std::streamsize>(depth.numel() * sizeof(float));
  in.read(reinterpret_cast<char*>(depth.data_ptr<float>()), nbytes);
  if (in.gcount() != nbytes) throw DataError("truncated depth file " + path.string());
  return depth;
}

void write_depth(const std::filesystem::path& path, const torch::Tensor& depth) {
  auto d = depth.detach().to(torch::kFloat32).squeeze().contiguous();
  TORCH_CHECK(d.dim() == 2, "write_depth expects an H x W map");
  const uint32_t dims[2] = {static_cast<uint32_t>(d.size(0)), static_cast<uint32_t>(d.size(1))};
  std::string bytes(kDepthMagic.begin(), kDepthMagic.end());
  bytes.append(reinterpret_cast<const char*>(dims), sizeof(dims));
  bytes.append(reinterpret_cast<const char*>(d.data_ptr<float>()), d.numel() * sizeof(float));
  write_file_atomically(path, bytes);
}

torch::Tensor colorize_depth(const torch::Tensor& depth) {
  auto d = depth.detach().to(torch::kFloat32).squeeze();
  TORCH_CHECK(d.dim() == 2, "colorize_depth expects an H x W map");
  auto inv = 1.0 / d.clamp_min(1e-3);
  const auto lo = inv.min().item<float>();
  const auto hi = inv.max().item<float>();
  auto norm = (inv - lo) / std::max(hi - lo, 1e-6f);
  auto gray = norm.mul(255.0).round().to(torch::kUInt8).contiguous();
  cv::Mat g(static_cast<int>(gray.size(0)), static_cast<int>(gray.size(1)), CV_8UC1, gray.data_ptr<uint8_t>());
  cv::Mat bgr;
  cv::applyColorMap(g, bgr, cv::COLORMAP_TURBO);
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  auto t = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8).clone();
  return t.permute({2, 0, 1}).to(torch::kFloat32).div_(255.0).contiguous();
}

void write_file_atomically(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string frame_name(int64_t index, const std::string& extension) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(index));
  return std::string(buf) + extension;
}

}  // namespace allday
