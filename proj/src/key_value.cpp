#include "allday/key_value.hpp"

#include "allday/errors.hpp"

#include <charconv>
#include <fstream>

namespace allday {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

KeyValues parse_key_values(std::istream& in, const std::string& origin) {
  KeyValues kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(origin + ":" + std::to_string(line_no) + ": expected key=value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_key_values(in, path.string());
}

double kv_double(const KeyValues& kv, const std::string& key, const std::string& origin) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw DataError(origin + ": missing key '" + key + "'");
  try {
    size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw DataError(origin + ": key '" + key + "' is not a number: '" + it->second + "'");
  }
}

int64_t kv_int(const KeyValues& kv, const std::string& key, const std::string& origin) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw DataError(origin + ": missing key '" + key + "'");
  int64_t v = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw DataError(origin + ": key '" + key + "' is not an integer: '" + s + "'");
  }
  return v;
}

}  // namespace allday
