#pragma once

#include <map>
#include <string>

#include "lsc/common.hpp"

namespace lsc::config {

// Flat `key = value` configuration with a fixed schema: dotted keys, one per
// line, `#` comments. Unknown keys and type errors are rejected, both from
// files and from command-line `key=value` overrides.
class Settings {
 public:
  static Settings defaults();
  static const std::string& schema_help();  // key, type and default per line

  void load_file(const std::string& path);
  void apply_override(const std::string& key_equals_value);
  void set(const std::string& key, const std::string& value);

  int geti(const std::string& key) const;
  double getd(const std::string& key) const;
  bool getb(const std::string& key) const;
  const std::string& gets(const std::string& key) const;

  // Sorted `key = value` lines (the manifest echo) and its content hash.
  std::string render() const;
  uint64_t content_hash() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace lsc::config
