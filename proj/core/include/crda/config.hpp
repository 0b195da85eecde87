#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace crda {

/// Config syntax or content error. Messages carry "line N" where a line is
/// known, or the offending key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `section.key = value` file with `#` comments.
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text, const std::string& origin = "<config>");
  static ConfigFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  /// Accepts plain numbers and fractions such as "60/255".
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;

  void require(const std::string& key) const;
  /// Throws on keys not in `known`, naming the key and its line.
  void reject_unknown(const std::set<std::string>& known) const;

  /// Canonical `key = value` dump in key order.
  std::string echo() const;

 private:
  struct Entry {
    std::string value;
    std::size_t line;
  };
  const Entry& entry(const std::string& key) const;

  std::map<std::string, Entry> entries_;
  std::string origin_;
};

double parse_number(const std::string& text);

}  // namespace crda
