#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

namespace protoforge::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat key-value configuration: one `key = "value"` per line, `#` comments.
/// Backend definitions use dotted keys: `backend.<id>.<field>`.
struct Config {
  std::map<std::string, std::string> values;

  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key,
                     const std::string& fallback) const;

  /// backend id -> field -> value, collected from `backend.*` keys.
  std::map<std::string, std::map<std::string, std::string>> backends() const;
};

Config parse(const std::string& text);
Config load(const std::filesystem::path& path);

}  // namespace protoforge::config
