#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <string>

namespace allday {

using KeyValues = std::map<std::string, std::string>;

/// Parses `key = value` lines. Blank lines and `#` comments are ignored;
/// a line without '=' throws DataError naming `origin` and the line number.
KeyValues parse_key_values(std::istream& in, const std::string& origin);
KeyValues read_key_values(const std::filesystem::path& path);

double kv_double(const KeyValues& kv, const std::string& key, const std::string& origin);
int64_t kv_int(const KeyValues& kv, const std::string& key, const std::string& origin);

}  // namespace allday
