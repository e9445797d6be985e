#ifndef AAR_CONFIG_HPP
#define AAR_CONFIG_HPP

#include "aar/common.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace aar {

/// Flat `key = value` document. Lines starting with '#' and blank lines are
/// ignored; keys are dotted (`train.batch_size`). Later assignments win.
class Config {
 public:
  Config() = default;

  static Config parse(std::string_view text, const std::string& source = "<config>");
  static Config load(const std::filesystem::path& path);

  /// `key=value`, as given on the command line.
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }
  /// Entries under `prefix.` with the prefix stripped.
  std::map<std::string, std::string> section(const std::string& prefix) const;

  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;
  std::vector<Index> get_indices(const std::string& key, std::vector<Index> fallback) const;

  /// Resolves a path value against the directory of the loaded file.
  std::filesystem::path get_path(const std::string& key, const std::filesystem::path& fallback) const;
  const std::filesystem::path& base_dir() const { return base_dir_; }

  /// Throws Config for any key outside `known` (entries ending in ".*" match a
  /// whole section).
  void check_keys(const std::vector<std::string>& known) const;

 private:
  std::map<std::string, std::string> values_;
  std::filesystem::path base_dir_;
};

}  // namespace aar

#endif  // AAR_CONFIG_HPP
