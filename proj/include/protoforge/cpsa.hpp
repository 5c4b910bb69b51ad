#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "protoforge/diagnostics.hpp"
#include "protoforge/sexpr.hpp"

namespace protoforge::cpsa {

enum class Sort { Name, Text, Data, Skey, Akey, Mesg };

std::optional<Sort> sort_from_token(std::string_view token);
const char* sort_token(Sort s);

/// Message algebra term.
///
/// Kinds: Var (name holds the id), Tag (name holds the quoted text),
/// PubKeyOf / InvKeyOf / Hash (one arg), LongTermKey / Enc (two args:
/// payload, key), Cat (>= 2 args).
struct Term {
  enum class Kind { Var, Tag, PubKeyOf, InvKeyOf, LongTermKey, Cat, Enc, Hash };
  Kind kind = Kind::Var;
  std::string name;
  std::vector<Term> args;
  SourceSpan span;

  static Term var(std::string id);
  static Term tag(std::string text);
  static Term pubk(Term inner);
  static Term invk(Term inner);
  static Term ltk(Term a, Term b);
  static Term cat(std::vector<Term> parts);
  static Term enc(Term payload, Term key);
  static Term hash(Term inner);
};

const char* term_kind_name(Term::Kind k);
std::optional<Term::Kind> term_kind_from_name(std::string_view name);

struct Event {
  enum class Direction { Send, Recv };
  Direction direction = Direction::Send;
  Term message;
  SourceSpan span;
};

using VarDecls = std::vector<std::pair<std::string, Sort>>;  // ordered

struct Role {
  std::string name;
  VarDecls vars;
  std::vector<Event> trace;
  std::vector<Term> uniq_orig;
  std::vector<Term> non_orig;
  SourceSpan span;
};

struct Protocol {
  std::string name;
  std::string algebra;  // expected "basic"
  std::vector<Role> roles;
  std::optional<std::string> herald;
  SourceSpan span;
};

struct StrandSpec {
  std::string role_name;
  std::int64_t height = 1;
  std::vector<std::pair<std::string, Term>> bindings;  // role-var -> term
  SourceSpan span;
};

struct Skeleton {
  std::string protocol_name;
  VarDecls vars;
  std::vector<StrandSpec> strands;
  std::vector<Term> listeners;
  std::vector<Term> non_orig;
  std::vector<Term> uniq_orig;
  SourceSpan span;
};

/// A whole source file: protocols, skeletons, and preserved unknown forms,
/// with the original interleaving recorded.
struct CpsaUnit {
  enum class ItemKind { Protocol, Skeleton, Raw };
  struct Item {
    ItemKind kind;
    std::size_t index;  // into the matching vector below
  };

  std::vector<Protocol> protocols;
  std::vector<Skeleton> skeletons;
  std::vector<sexpr::SExpr> raw_forms;
  std::vector<Item> source_order;
};

struct LowerResult {
  CpsaUnit unit;
  std::vector<Diagnostic> diagnostics;
};

/// Lowers parsed forms into the typed model. Total: always returns a unit,
/// possibly with fewer constructs than input forms.
LowerResult lower(const std::vector<sexpr::SExpr>& forms);

/// Well-formedness findings for one protocol. Deterministic order: span, code.
std::vector<Diagnostic> validate_protocol(const Protocol& p);

std::vector<Diagnostic> validate_skeleton(const Skeleton& s,
                                          const CpsaUnit& unit);

/// Style findings across the unit (shadowed builtins, plaintext keys,
/// missing herald).
std::vector<Diagnostic> lint(const CpsaUnit& unit);

/// Every diagnostic for a unit: validate each protocol and skeleton plus lint.
std::vector<Diagnostic> check_unit(const CpsaUnit& unit);

/// Canonical rendering: herald first, each protocol followed by its
/// skeletons, two-space indentation, vars grouped by sort.
std::string format_unit(const CpsaUnit& unit);

/// Structural equality, spans excluded.
bool terms_equal(const Term& a, const Term& b);
bool units_equal(const CpsaUnit& a, const CpsaUnit& b);

/// Sort of a term given in-scope variable declarations. Variables without a
/// declaration report no sort.
std::optional<Sort> term_sort(const Term& t, const VarDecls& vars);

/// Reserved operator names that user variables may shadow (L-SHADOWS-BUILTIN).
const std::vector<std::string>& reserved_words();

}  // namespace protoforge::cpsa
