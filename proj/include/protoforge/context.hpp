#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace protoforge::context {

inline constexpr const char* kQueryPlaceholder = "{{QUERY}}";

struct InstructionTemplate {
  std::string template_id;  // file stem
  std::string body;         // contains the placeholder exactly once
  std::string description;  // first comment line of the file, if any
};

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class MissingPlaceholder : public TemplateError {
 public:
  using TemplateError::TemplateError;
};
class DuplicatePlaceholder : public TemplateError {
 public:
  using TemplateError::TemplateError;
};
class EmptyDirectory : public TemplateError {
 public:
  using TemplateError::TemplateError;
};
class UnknownTemplate : public TemplateError {
 public:
  using TemplateError::TemplateError;
};
class EmptyQuery : public TemplateError {
 public:
  using TemplateError::TemplateError;
};

class TemplateRegistry {
 public:
  /// Loads every `*.prompt` file in the directory. Throws on files that
  /// violate the single-placeholder rule or when nothing is found.
  static TemplateRegistry load(const std::filesystem::path& directory);

  /// Registry built from in-memory templates (tests, embedded defaults).
  static TemplateRegistry from_templates(
      std::vector<InstructionTemplate> templates);

  const InstructionTemplate& get(const std::string& template_id) const;
  bool contains(const std::string& template_id) const;

  /// Ids in lexicographic order.
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, InstructionTemplate> templates_;
};

struct Context {
  std::string text;
  std::string template_id;
  std::string query_digest;  // content hash of the raw query
};

/// Substitutes the query for the placeholder, single-pass. The query must be
/// nonempty after trimming; it is inserted untrimmed.
Context build_context(const std::string& query, const std::string& template_id,
                      const TemplateRegistry& registry);

/// FNV-1a 64-bit, lowercase hex. Stable across platforms.
std::string content_digest(std::string_view bytes);

}  // namespace protoforge::context
