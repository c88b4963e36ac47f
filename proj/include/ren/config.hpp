#pragma once

#include <string>
#include <vector>

namespace ren {

struct ConfigEntry {
  int line = 0;
  std::string key;
  std::string value;
};

// `key = value` lines; blank lines and `#` comments are skipped. Keys are
// normalized to lower case with '_' replaced by '-'. Malformed lines and
// repeated keys throw IoError naming the file and line.
std::vector<ConfigEntry> read_config(const std::string& path);
std::vector<ConfigEntry> parse_config(const std::string& text, const std::string& origin);

}  // namespace ren
