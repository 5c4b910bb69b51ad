#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace protoforge {

/// Byte range plus human line/column of the range start.
struct SourceSpan {
  std::size_t start_byte = 0;
  std::size_t end_byte = 0;
  std::size_t line = 1;    // 1-based
  std::size_t column = 1;  // 1-based
};

enum class Severity { Error, Warning, Lint };

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string code;     // stable identifier, e.g. "E-UNDECLARED-VAR"
  std::string message;
  SourceSpan span;
};

/// Stable ordering used by all producers: by span start, then code, then message.
bool diagnostic_before(const Diagnostic& a, const Diagnostic& b);

void sort_diagnostics(std::vector<Diagnostic>& diags);

std::size_t count_errors(const std::vector<Diagnostic>& diags);

struct DiagnosticInfo {
  const char* code;
  Severity severity;
  const char* description;
};

/// The closed registry of every code this toolkit can emit.
const std::vector<DiagnosticInfo>& diagnostic_registry();

/// Markdown rendering of the registry (one table row per code).
std::string diagnostic_registry_markdown();

const char* severity_name(Severity s);

}  // namespace protoforge
