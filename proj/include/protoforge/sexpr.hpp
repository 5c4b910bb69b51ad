#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "protoforge/diagnostics.hpp"

namespace protoforge::sexpr {

constexpr std::size_t kMaxNestingDepth = 256;

/// Generic symbolic expression with source spans.
///
/// Grammar: symbols, double-quoted strings (backslash escapes for `"` and
/// `\`), optionally signed decimal integers, and lists. Line comments start
/// with `;`. Symbols are case-sensitive.
struct SExpr {
  enum class Kind { Symbol, String, Integer, List };

  Kind kind = Kind::List;
  std::string text;           // Symbol / String payload
  std::int64_t value = 0;     // Integer payload
  std::vector<SExpr> children;
  SourceSpan span;

  static SExpr symbol(std::string s);
  static SExpr string(std::string s);
  static SExpr integer(std::int64_t v);
  static SExpr list(std::vector<SExpr> items);

  bool is_symbol() const { return kind == Kind::Symbol; }
  bool is_symbol(std::string_view name) const {
    return kind == Kind::Symbol && text == name;
  }
  bool is_list() const { return kind == Kind::List; }

  /// Head symbol of a list, or "" when not a symbol-headed list.
  std::string_view head() const;
};

struct ParseOutcome {
  std::vector<SExpr> forms;
  std::vector<Diagnostic> diagnostics;
};

/// Parses every maximal well-nested top-level form. Unbalanced input yields
/// one diagnostic per offending delimiter; forms inside an unclosed list are
/// dropped rather than returned partially nested.
ParseOutcome parse(std::string_view text);

struct PrintStyle {
  enum class Mode { Compact, Indented };
  Mode mode = Mode::Compact;
  std::size_t width = 72;

  static PrintStyle compact() { return {Mode::Compact, 0}; }
  static PrintStyle indented(std::size_t width = 72) {
    return {Mode::Indented, width};
  }
};

/// Renders a form so that it re-parses to a structurally identical tree.
std::string print(const SExpr& form, PrintStyle style = PrintStyle::compact());

/// Structural equality, spans excluded.
bool structurally_equal(const SExpr& a, const SExpr& b);

struct ExtractedBlock {
  enum class Origin { Fenced, RawScan };
  std::string text;
  Origin origin = Origin::Fenced;
};

/// Pulls candidate s-expression blocks out of model prose: triple-backtick
/// fences first, falling back to a raw scan for maximal balanced regions
/// starting at `(` when no fence parses.
std::vector<ExtractedBlock> extract_blocks(std::string_view prose);

}  // namespace protoforge::sexpr
