#include "protoforge/diagnostics.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

namespace protoforge {

bool diagnostic_before(const Diagnostic& a, const Diagnostic& b) {
  return std::tie(a.span.start_byte, a.code, a.message) <
         std::tie(b.span.start_byte, b.code, b.message);
}

void sort_diagnostics(std::vector<Diagnostic>& diags) {
  std::stable_sort(diags.begin(), diags.end(), diagnostic_before);
}

std::size_t count_errors(const std::vector<Diagnostic>& diags) {
  return static_cast<std::size_t>(
      std::count_if(diags.begin(), diags.end(), [](const Diagnostic& d) {
        return d.severity == Severity::Error;
      }));
}

const std::vector<DiagnosticInfo>& diagnostic_registry() {
  static const std::vector<DiagnosticInfo> registry = {
      // Reader
      {"E-UNBALANCED-OPEN", Severity::Error,
       "A list is opened but never closed before end of input."},
      {"E-UNBALANCED-CLOSE", Severity::Error,
       "A stray closing delimiter with no matching open."},
      {"E-UNTERMINATED-STRING", Severity::Error,
       "A double-quoted string runs to end of input without a closing quote."},
      {"E-INVALID-CHAR", Severity::Error,
       "A byte that cannot start or continue any token."},
      {"E-MAX-DEPTH", Severity::Error,
       "Nesting exceeds the maximum list depth of 256."},
      // Lowering
      {"E-UNKNOWN-FORM", Severity::Error,
       "Unrecognized head symbol inside a recognized construct."},
      {"E-BAD-ARITY", Severity::Error,
       "A recognized operator or construct has the wrong number of arguments."},
      {"E-BAD-SORT", Severity::Error,
       "A variable declaration names a sort outside "
       "{name, text, data, skey, akey, mesg}."},
      {"E-DUPLICATE-ROLE", Severity::Error,
       "Two roles in the same protocol share a name."},
      {"W-UNKNOWN-TOP-FORM", Severity::Warning,
       "An unrecognized top-level form was preserved verbatim, not lowered."},
      // Protocol validation
      {"E-UNDECLARED-VAR", Severity::Error,
       "A variable is used but not declared in the enclosing vars list."},
      {"E-INVK-SORT", Severity::Error,
       "invk applied to a term whose sort is neither akey nor mesg."},
      {"E-EMPTY-TRACE", Severity::Error, "A role has no trace events."},
      {"E-ORIG-NOT-CARRIED", Severity::Error,
       "A uniq-orig term never appears in the role's trace."},
      {"W-UNUSED-VAR", Severity::Warning,
       "A variable is declared but never used."},
      {"W-WEAK-KEY-SORT", Severity::Warning,
       "An encryption key has sort text or data."},
      // Skeleton validation
      {"E-NO-SUCH-PROTOCOL", Severity::Error,
       "A skeleton names a protocol not defined in the unit."},
      {"E-NO-SUCH-ROLE", Severity::Error,
       "A strand names a role the protocol does not define."},
      {"E-HEIGHT-EXCEEDS-TRACE", Severity::Error,
       "A strand's height exceeds its role's trace length."},
      {"E-BAD-BINDING", Severity::Error,
       "A strand binding's left side is not a declared role variable."},
      // Lints
      {"L-SHADOWS-BUILTIN", Severity::Lint,
       "A declared variable shadows a reserved operator name."},
      {"L-PLAINTEXT-KEY", Severity::Lint,
       "A sent message carries key material outside any encryption."},
      {"L-NO-HERALD", Severity::Lint,
       "The unit defines protocols but carries no herald."},
  };
  return registry;
}

std::string diagnostic_registry_markdown() {
  std::ostringstream out;
  out << "# Diagnostic codes\n\n";
  out << "| Code | Severity | Description |\n";
  out << "|------|----------|-------------|\n";
  for (const auto& info : diagnostic_registry()) {
    out << "| " << info.code << " | " << severity_name(info.severity) << " | "
        << info.description << " |\n";
  }
  return out.str();
}

const char* severity_name(Severity s) {
  switch (s) {
    case Severity::Error: return "error";
    case Severity::Warning: return "warning";
    case Severity::Lint: return "lint";
  }
  return "unknown";
}

}  // namespace protoforge
