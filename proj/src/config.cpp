#include "protoforge/config.hpp"

#include <fstream>
#include <sstream>

namespace protoforge::config {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::optional<std::string> Config::get(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) return std::nullopt;
  return it->second;
}

std::string Config::get_or(const std::string& key,
                           const std::string& fallback) const {
  auto v = get(key);
  return v ? *v : fallback;
}

std::map<std::string, std::map<std::string, std::string>> Config::backends()
    const {
  std::map<std::string, std::map<std::string, std::string>> out;
  const std::string prefix = "backend.";
  for (const auto& [key, value] : values) {
    if (key.rfind(prefix, 0) != 0) continue;
    std::size_t dot = key.find('.', prefix.size());
    if (dot == std::string::npos)
      throw ConfigError("backend key has no field: " + key);
    out[key.substr(prefix.size(), dot - prefix.size())]
       [key.substr(dot + 1)] = value;
  }
  return out;
}

Config parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected `key = \"value\"`");
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    else if (!value.empty() && value.front() == '"')
      throw ConfigError("line " + std::to_string(line_no) +
                        ": unterminated quote");
    if (cfg.values.count(key))
      throw ConfigError("line " + std::to_string(line_no) +
                        ": duplicate key `" + key + "`");
    cfg.values[key] = value;
  }
  return cfg;
}

Config load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace protoforge::config
