#include "crda/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace crda {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_plain(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + text + "'");
  }
  if (used != text.size()) throw ConfigError("not a number: '" + text + "'");
  return v;
}

}  // namespace

double parse_number(const std::string& text) {
  const std::string t = trim(text);
  const auto slash = t.find('/');
  if (slash == std::string::npos) return parse_plain(t);
  const double den = parse_plain(trim(t.substr(slash + 1)));
  if (den == 0.0) throw ConfigError("division by zero in '" + text + "'");
  return parse_plain(trim(t.substr(0, slash))) / den;
}

ConfigFile ConfigFile::parse(const std::string& text, const std::string& origin) {
  ConfigFile cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ": line " + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'section.key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto dot = key.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == key.size()) {
      throw ConfigError(where + ": key '" + key + "' must look like section.key");
    }
    if (std::any_of(key.begin(), key.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
      throw ConfigError(where + ": key '" + key + "' contains whitespace");
    }
    if (value.empty()) throw ConfigError(where + ": empty value for '" + key + "'");
    if (cfg.entries_.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    cfg.entries_[key] = Entry{value, line_no};
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void ConfigFile::set(const std::string& key, const std::string& value) { entries_[key] = Entry{value, 0}; }

const ConfigFile::Entry& ConfigFile::entry(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError(origin_ + ": missing required key '" + key + "'");
  return it->second;
}

std::string ConfigFile::get_string(const std::string& key) const { return entry(key).value; }

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? entry(key).value : fallback;
}

double ConfigFile::get_double(const std::string& key) const {
  const Entry& e = entry(key);
  try {
    return parse_number(e.value);
  } catch (const ConfigError& err) {
    throw ConfigError(origin_ + ": line " + std::to_string(e.line) + ": " + key + ": " + err.what());
  }
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::int64_t ConfigFile::get_int(const std::string& key, std::int64_t fallback) const {
  if (!has(key)) return fallback;
  const Entry& e = entry(key);
  std::int64_t v = 0;
  const auto res = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
  if (res.ec != std::errc() || res.ptr != e.value.data() + e.value.size()) {
    throw ConfigError(origin_ + ": line " + std::to_string(e.line) + ": " + key + ": not an integer: '" + e.value + "'");
  }
  return v;
}

std::uint64_t ConfigFile::get_u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const Entry& e = entry(key);
  std::uint64_t v = 0;
  const auto res = std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
  if (res.ec != std::errc() || res.ptr != e.value.data() + e.value.size()) {
    throw ConfigError(origin_ + ": line " + std::to_string(e.line) + ": " + key + ": not an unsigned integer: '" +
                      e.value + "'");
  }
  return v;
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const Entry& e = entry(key);
  if (e.value == "true" || e.value == "1" || e.value == "on" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "off" || e.value == "no") return false;
  throw ConfigError(origin_ + ": line " + std::to_string(e.line) + ": " + key + ": not a boolean: '" + e.value + "'");
}

std::vector<std::string> ConfigFile::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(entry(key).value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void ConfigFile::require(const std::string& key) const { (void)entry(key); }

void ConfigFile::reject_unknown(const std::set<std::string>& known) const {
  for (const auto& [key, e] : entries_) {
    if (!known.count(key)) {
      throw ConfigError(origin_ + ": line " + std::to_string(e.line) + ": unknown key '" + key + "'");
    }
  }
}

std::string ConfigFile::echo() const {
  std::string out;
  for (const auto& [key, e] : entries_) out += key + " = " + e.value + "\n";
  return out;
}

}  // namespace crda
