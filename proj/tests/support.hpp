#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#ifndef PROTOFORGE_FIXTURE_DIR
#error "PROTOFORGE_FIXTURE_DIR must be defined by the build"
#endif

namespace testsupport {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::string fixture_path(const std::string& name) {
  return std::string(PROTOFORGE_FIXTURE_DIR) + "/" + name;
}

inline std::string fixture(const std::string& name) {
  return read_file(fixture_path(name));
}

}  // namespace testsupport
