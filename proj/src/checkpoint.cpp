#include "allday/checkpoint.hpp"

#include "allday/errors.hpp"
#include "allday/image_io.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <iterator>

namespace allday {

namespace {

constexpr std::array<char, 8> kMagic = {'A', 'L', 'L', 'D', 'A', 'Y', 'C', 'K'};

std::string dtype_name(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return "f32";
    case torch::kFloat64: return "f64";
    case torch::kInt64: return "i64";
    default: throw DataError(std::string("checkpoint cannot store dtype ") + c10::toString(t));
  }
}

torch::ScalarType dtype_from_name(const std::string& s) {
  if (s == "f32") return torch::kFloat32;
  if (s == "f64") return torch::kFloat64;
  if (s == "i64") return torch::kInt64;
  throw DataError("checkpoint has unknown dtype '" + s + "'");
}

template <typename T>
void append_raw(std::string& out, const T& value) {
  out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

}  // namespace

const torch::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["step"] = ckpt.step;
  header["config"] = ckpt.config;
  auto& dir = header["tensors"] = nlohmann::json::array();
  std::vector<torch::Tensor> blobs;
  uint64_t offset = 0;
  for (const auto& [name, tensor] : ckpt.tensors) {
    auto t = tensor.detach().cpu().contiguous();
    const uint64_t nbytes = t.numel() * t.element_size();
    dir.push_back({{"name", name},
                   {"dtype", dtype_name(t.scalar_type())},
                   {"shape", t.sizes().vec()},
                   {"offset", offset},
                   {"nbytes", nbytes}});
    offset += nbytes;
    blobs.push_back(t);
  }
  const auto header_text = header.dump();

  std::string bytes(kMagic.begin(), kMagic.end());
  append_raw(bytes, ckpt.version);
  append_raw(bytes, static_cast<uint64_t>(header_text.size()));
  bytes += header_text;
  bytes.reserve(bytes.size() + offset);
  for (const auto& t : blobs) {
    bytes.append(static_cast<const char*>(t.data_ptr()), t.numel() * t.element_size());
  }
  write_file_atomically(path, bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& why) { return DataError(path.string() + ": " + why); };

  constexpr size_t kFixed = kMagic.size() + sizeof(uint32_t) + sizeof(uint64_t);
  if (bytes.size() < kFixed || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw fail("not a checkpoint file");
  }
  Checkpoint ckpt;
  std::memcpy(&ckpt.version, bytes.data() + kMagic.size(), sizeof(uint32_t));
  if (ckpt.version != kCheckpointVersion) throw fail("unsupported checkpoint version " + std::to_string(ckpt.version));
  uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + kMagic.size() + sizeof(uint32_t), sizeof(uint64_t));
  if (bytes.size() < kFixed + header_len) throw fail("truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + kFixed, bytes.begin() + static_cast<std::ptrdiff_t>(kFixed + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("corrupt header: ") + e.what());
  }
  ckpt.step = header.at("step").get<int64_t>();
  ckpt.config = header.at("config");
  const size_t data_start = kFixed + header_len;
  for (const auto& entry : header.at("tensors")) {
    const auto offset = entry.at("offset").get<uint64_t>();
    const auto nbytes = entry.at("nbytes").get<uint64_t>();
    if (data_start + offset + nbytes > bytes.size()) throw fail("truncated tensor data");
    auto t = torch::empty(entry.at("shape").get<std::vector<int64_t>>(),
                          dtype_from_name(entry.at("dtype").get<std::string>()));
    if (static_cast<uint64_t>(t.numel() * t.element_size()) != nbytes) throw fail("tensor size mismatch");
    std::memcpy(t.data_ptr(), bytes.data() + data_start + offset, nbytes);
    ckpt.tensors.emplace_back(entry.at("name").get<std::string>(), t);
  }
  return ckpt;
}

}  // namespace allday
