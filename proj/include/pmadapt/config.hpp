#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pmadapt {

/// Flat experiment configuration.
///
/// The file format is one `key = value` per line with `#` comments. Keys are
/// dotted (model.t, adapt.epoch_size, ...); a `[section]` line prefixes the
/// keys that follow it. Only keys from the built-in schema are accepted, and
/// every key has a default, so a config is fully described by its explicit
/// overrides.
class Config {
 public:
  Config() = default;

  static Config parse(std::istream& in);
  static Config parse_string(const std::string& text);
  static Config load(const std::string& path);

  /// Throws ConfigError for keys outside the schema.
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  /// Explicit value, else the schema default ("" when the default is derived).
  std::string get(const std::string& key) const;

  std::string get_string(const std::string& key) const { return get(key); }
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  /// Comma-separated list of doubles; empty when unset.
  std::vector<double> get_list(const std::string& key) const;
  std::optional<double> get_optional_double(const std::string& key) const;

  /// Every schema key in sorted order with its effective value; parsing this
  /// text gives back an equal config.
  std::string serialize() const;
  /// FNV-1a 64 of serialize() without the keys that cannot change results
  /// (output_dir, jobs), as 16 hex digits.
  std::string hash() const;

  bool operator==(const Config& other) const { return serialize() == other.serialize(); }

  static const std::vector<std::string>& keys();

 private:
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a64(const std::string& text);

}  // namespace pmadapt
