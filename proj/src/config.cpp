#include "aar/config.hpp"

#include "aar/io.hpp"

#include <algorithm>
#include <sstream>

namespace aar {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T, typename Parse>
T parse_value(const std::string& key, const std::string& value, Parse parse) {
  try {
    std::size_t used = 0;
    T out = parse(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::Config, "bad value '" + value + "' for key '" + key + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  return parse_value<double>(key, v, [](const std::string& s, std::size_t* n) { return std::stod(s, n); });
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  return parse_value<std::int64_t>(key, v,
                                   [](const std::string& s, std::size_t* n) { return std::stoll(s, n); });
}

}  // namespace

Config Config::parse(std::string_view text, const std::string& source) {
  Config c;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Config, source + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) {
      throw Error(ErrorKind::Config, source + ":" + std::to_string(lineno) + ": empty key");
    }
    c.values_[key] = trim(std::string_view(t).substr(eq + 1));
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  Config c = parse(io::read_text(path), path.string());
  c.base_dir_ = path.parent_path();
  return c;
}

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorKind::Config, "override '" + assignment + "' is not key=value");
  }
  values_[trim(std::string_view(assignment).substr(0, eq))] =
      trim(std::string_view(assignment).substr(eq + 1));
}

std::map<std::string, std::string> Config::section(const std::string& prefix) const {
  std::map<std::string, std::string> out;
  const std::string p = prefix + ".";
  for (const auto& [k, v] : values_) {
    if (k.rfind(p, 0) == 0) out.emplace(k.substr(p.size()), v);
  }
  return out;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : to_double(key, it->second);
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : to_int(key, it->second);
}

std::uint64_t Config::get_uint(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (!it->second.empty() && it->second[0] == '-') {
    throw Error(ErrorKind::Config, "key '" + key + "' must be non-negative");
  }
  return parse_value<std::uint64_t>(
      key, it->second, [](const std::string& s, std::size_t* n) { return std::stoull(s, n); });
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw Error(ErrorKind::Config, "bad boolean '" + it->second + "' for key '" + key + "'");
}

std::vector<double> Config::get_doubles(const std::string& key, std::vector<double> fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(it->second)) out.push_back(to_double(key, item));
  return out;
}

std::vector<Index> Config::get_indices(const std::string& key, std::vector<Index> fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<Index> out;
  for (const auto& item : split_list(it->second)) out.push_back(to_int(key, item));
  return out;
}

std::filesystem::path Config::get_path(const std::string& key,
                                       const std::filesystem::path& fallback) const {
  auto it = values_.find(key);
  std::filesystem::path p = it == values_.end() ? fallback : std::filesystem::path(it->second);
  if (p.is_relative() && !base_dir_.empty()) p = base_dir_ / p;
  return p;
}

void Config::check_keys(const std::vector<std::string>& known) const {
  for (const auto& [key, _] : values_) {
    const bool ok = std::any_of(known.begin(), known.end(), [&](const std::string& k) {
      if (k.size() > 2 && k.compare(k.size() - 2, 2, ".*") == 0) {
        return key.rfind(k.substr(0, k.size() - 1), 0) == 0;
      }
      return key == k;
    });
    if (!ok) throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
  }
}

}  // namespace aar
