#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gicisad {

/// Flat `key = value` text: one pair per line, `#` starts a comment,
/// blank lines ignored, duplicate keys rejected.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text);

  bool contains(const std::string& key) const { return values_.contains(key); }
  const std::map<std::string, std::string>& items() const noexcept { return values_; }

  /// Throws ConfigError naming the first key not in `allowed`.
  void require_known(const std::vector<std::string>& allowed) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::int64_t> get_int_list(const std::string& key,
                                         const std::vector<std::int64_t>& fallback) const;

 private:
  std::map<std::string, std::string> values_;
};

double parse_double_value(const std::string& key, const std::string& text);
std::int64_t parse_int_value(const std::string& key, const std::string& text);
bool parse_bool_value(const std::string& key, const std::string& text);

}  // namespace gicisad
