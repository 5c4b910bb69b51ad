#include "protoforge/cpsa.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

namespace protoforge::cpsa {

using sexpr::SExpr;

std::optional<Sort> sort_from_token(std::string_view token) {
  if (token == "name") return Sort::Name;
  if (token == "text") return Sort::Text;
  if (token == "data") return Sort::Data;
  if (token == "skey") return Sort::Skey;
  if (token == "akey") return Sort::Akey;
  if (token == "mesg") return Sort::Mesg;
  return std::nullopt;
}

const char* sort_token(Sort s) {
  switch (s) {
    case Sort::Name: return "name";
    case Sort::Text: return "text";
    case Sort::Data: return "data";
    case Sort::Skey: return "skey";
    case Sort::Akey: return "akey";
    case Sort::Mesg: return "mesg";
  }
  return "mesg";
}

Term Term::var(std::string id) {
  Term t;
  t.kind = Kind::Var;
  t.name = std::move(id);
  return t;
}

Term Term::tag(std::string text) {
  Term t;
  t.kind = Kind::Tag;
  t.name = std::move(text);
  return t;
}

namespace {
Term unary(Term::Kind k, Term inner) {
  Term t;
  t.kind = k;
  t.args.push_back(std::move(inner));
  return t;
}
}  // namespace

Term Term::pubk(Term inner) { return unary(Kind::PubKeyOf, std::move(inner)); }
Term Term::invk(Term inner) { return unary(Kind::InvKeyOf, std::move(inner)); }
Term Term::hash(Term inner) { return unary(Kind::Hash, std::move(inner)); }

Term Term::ltk(Term a, Term b) {
  Term t;
  t.kind = Kind::LongTermKey;
  t.args.push_back(std::move(a));
  t.args.push_back(std::move(b));
  return t;
}

Term Term::cat(std::vector<Term> parts) {
  Term t;
  t.kind = Kind::Cat;
  t.args = std::move(parts);
  return t;
}

Term Term::enc(Term payload, Term key) {
  Term t;
  t.kind = Kind::Enc;
  t.args.push_back(std::move(payload));
  t.args.push_back(std::move(key));
  return t;
}

const char* term_kind_name(Term::Kind k) {
  switch (k) {
    case Term::Kind::Var: return "var";
    case Term::Kind::Tag: return "tag";
    case Term::Kind::PubKeyOf: return "pubk";
    case Term::Kind::InvKeyOf: return "invk";
    case Term::Kind::LongTermKey: return "ltk";
    case Term::Kind::Cat: return "cat";
    case Term::Kind::Enc: return "enc";
    case Term::Kind::Hash: return "hash";
  }
  return "var";
}

std::optional<Term::Kind> term_kind_from_name(std::string_view name) {
  if (name == "var") return Term::Kind::Var;
  if (name == "tag") return Term::Kind::Tag;
  if (name == "pubk") return Term::Kind::PubKeyOf;
  if (name == "invk") return Term::Kind::InvKeyOf;
  if (name == "ltk") return Term::Kind::LongTermKey;
  if (name == "cat") return Term::Kind::Cat;
  if (name == "enc") return Term::Kind::Enc;
  if (name == "hash") return Term::Kind::Hash;
  return std::nullopt;
}

const std::vector<std::string>& reserved_words() {
  static const std::vector<std::string> words = {
      "pubk", "privk", "invk", "ltk",   "cat",  "enc",
      "hash", "send",  "recv", "trace", "vars",
  };
  return words;
}

// ---------------------------------------------------------------------------
// Lowering
// ---------------------------------------------------------------------------

namespace {

class Lowerer {
 public:
  LowerResult run(const std::vector<SExpr>& forms) {
    for (const SExpr& form : forms) {
      auto head = form.head();
      if (head == "herald") {
        lower_herald(form);
      } else if (head == "defprotocol") {
        lower_protocol(form);
      } else if (head == "defskeleton") {
        lower_skeleton(form);
      } else {
        warn(form.span, "W-UNKNOWN-TOP-FORM",
             "unrecognized top-level form preserved verbatim");
        result_.unit.raw_forms.push_back(form);
        result_.unit.source_order.push_back(
            {CpsaUnit::ItemKind::Raw, result_.unit.raw_forms.size() - 1});
      }
    }
    if (pending_herald_) {
      // Herald with no following protocol: keep it as an opaque form.
      result_.unit.raw_forms.push_back(*pending_herald_form_);
      result_.unit.source_order.push_back(
          {CpsaUnit::ItemKind::Raw, result_.unit.raw_forms.size() - 1});
    }
    sort_diagnostics(result_.diagnostics);
    return std::move(result_);
  }

 private:
  void error(const SourceSpan& span, const char* code, std::string msg) {
    result_.diagnostics.push_back(
        {Severity::Error, code, std::move(msg), span});
  }

  void warn(const SourceSpan& span, const char* code, std::string msg) {
    result_.diagnostics.push_back(
        {Severity::Warning, code, std::move(msg), span});
  }

  void lower_herald(const SExpr& form) {
    if (form.children.size() != 2 ||
        form.children[1].kind != SExpr::Kind::String) {
      error(form.span, "E-BAD-ARITY", "herald takes one string");
      return;
    }
    pending_herald_ = form.children[1].text;
    pending_herald_form_ = form;
  }

  void lower_protocol(const SExpr& form) {
    if (form.children.size() < 3 || !form.children[1].is_symbol() ||
        !form.children[2].is_symbol()) {
      error(form.span, "E-BAD-ARITY",
            "defprotocol takes a name, an algebra, and roles");
      return;
    }
    Protocol p;
    p.span = form.span;
    p.name = form.children[1].text;
    p.algebra = form.children[2].text;
    if (pending_herald_) {
      p.herald = std::move(pending_herald_);
      pending_herald_.reset();
      pending_herald_form_.reset();
    }
    std::set<std::string> seen_roles;
    for (std::size_t i = 3; i < form.children.size(); ++i) {
      const SExpr& sub = form.children[i];
      if (sub.head() == "defrole") {
        auto role = lower_role(sub);
        if (!role) continue;
        if (!seen_roles.insert(role->name).second)
          error(sub.span, "E-DUPLICATE-ROLE",
                "role `" + role->name + "` is defined twice");
        p.roles.push_back(std::move(*role));
      } else {
        error(sub.span, "E-UNKNOWN-FORM",
              "expected defrole inside defprotocol, got `" +
                  std::string(sub.head()) + "`");
      }
    }
    result_.unit.protocols.push_back(std::move(p));
    result_.unit.source_order.push_back(
        {CpsaUnit::ItemKind::Protocol, result_.unit.protocols.size() - 1});
  }

  std::optional<Role> lower_role(const SExpr& form) {
    if (form.children.size() < 2 || !form.children[1].is_symbol()) {
      error(form.span, "E-BAD-ARITY", "defrole takes a role name");
      return std::nullopt;
    }
    Role r;
    r.span = form.span;
    r.name = form.children[1].text;
    for (std::size_t i = 2; i < form.children.size(); ++i) {
      const SExpr& sub = form.children[i];
      auto head = sub.head();
      if (head == "vars") {
        lower_vars(sub, r.vars);
      } else if (head == "trace") {
        lower_trace(sub, r.trace);
      } else if (head == "uniq-orig") {
        lower_term_list(sub, r.uniq_orig);
      } else if (head == "non-orig") {
        lower_term_list(sub, r.non_orig);
      } else {
        error(sub.span, "E-UNKNOWN-FORM",
              "unrecognized form `" + std::string(head) + "` inside defrole");
      }
    }
    return r;
  }

  void lower_vars(const SExpr& form, VarDecls& out) {
    for (std::size_t i = 1; i < form.children.size(); ++i) {
      const SExpr& decl = form.children[i];
      if (!decl.is_list() || decl.children.size() < 2) {
        error(decl.span, "E-BAD-ARITY",
              "a vars entry is (id ... sort) with at least one id");
        continue;
      }
      const SExpr& sort_tok = decl.children.back();
      auto sort = sort_tok.is_symbol() ? sort_from_token(sort_tok.text)
                                       : std::nullopt;
      if (!sort) {
        error(sort_tok.span, "E-BAD-SORT",
              "unknown sort token in vars entry");
        continue;
      }
      for (std::size_t j = 0; j + 1 < decl.children.size(); ++j) {
        if (!decl.children[j].is_symbol()) {
          error(decl.children[j].span, "E-BAD-ARITY",
                "variable ids must be symbols");
          continue;
        }
        out.emplace_back(decl.children[j].text, *sort);
      }
    }
  }

  void lower_trace(const SExpr& form, std::vector<Event>& out) {
    for (std::size_t i = 1; i < form.children.size(); ++i) {
      const SExpr& ev = form.children[i];
      auto head = ev.head();
      if (head != "send" && head != "recv") {
        error(ev.span, "E-UNKNOWN-FORM",
              "trace events must be (send term) or (recv term)");
        continue;
      }
      if (ev.children.size() != 2) {
        error(ev.span, "E-BAD-ARITY",
              std::string(head) + " takes exactly one message term");
        continue;
      }
      auto msg = lower_term(ev.children[1]);
      if (!msg) continue;
      Event e;
      e.direction = head == "send" ? Event::Direction::Send
                                   : Event::Direction::Recv;
      e.message = std::move(*msg);
      e.span = ev.span;
      out.push_back(std::move(e));
    }
  }

  void lower_term_list(const SExpr& form, std::vector<Term>& out) {
    for (std::size_t i = 1; i < form.children.size(); ++i)
      if (auto t = lower_term(form.children[i])) out.push_back(std::move(*t));
  }

  std::optional<Term> lower_term(const SExpr& e) {
    switch (e.kind) {
      case SExpr::Kind::Symbol: {
        Term t = Term::var(e.text);
        t.span = e.span;
        return t;
      }
      case SExpr::Kind::String: {
        Term t = Term::tag(e.text);
        t.span = e.span;
        return t;
      }
      case SExpr::Kind::Integer:
        error(e.span, "E-UNKNOWN-FORM", "an integer is not a message term");
        return std::nullopt;
      case SExpr::Kind::List:
        break;
    }
    auto head = e.head();
    std::size_t argc = e.children.empty() ? 0 : e.children.size() - 1;
    auto arg = [&](std::size_t i) { return lower_term(e.children[i + 1]); };

    if (head == "pubk" || head == "privk" || head == "invk" ||
        head == "hash") {
      if (argc != 1) {
        error(e.span, "E-BAD-ARITY",
              std::string(head) + " takes exactly one argument");
        return std::nullopt;
      }
      auto inner = arg(0);
      if (!inner) return std::nullopt;
      Term t;
      if (head == "pubk")
        t = Term::pubk(std::move(*inner));
      else if (head == "invk")
        t = Term::invk(std::move(*inner));
      else if (head == "hash")
        t = Term::hash(std::move(*inner));
      else
        t = Term::invk(Term::pubk(std::move(*inner)));  // privk
      t.span = e.span;
      return t;
    }
    if (head == "ltk") {
      if (argc != 2) {
        error(e.span, "E-BAD-ARITY", "ltk takes exactly two arguments");
        return std::nullopt;
      }
      auto a = arg(0), b = arg(1);
      if (!a || !b) return std::nullopt;
      Term t = Term::ltk(std::move(*a), std::move(*b));
      t.span = e.span;
      return t;
    }
    if (head == "cat") {
      if (argc < 2) {
        error(e.span, "E-BAD-ARITY", "cat takes at least two arguments");
        return std::nullopt;
      }
      std::vector<Term> parts;
      for (std::size_t i = 0; i < argc; ++i) {
        auto p = arg(i);
        if (!p) return std::nullopt;
        parts.push_back(std::move(*p));
      }
      Term t = Term::cat(std::move(parts));
      t.span = e.span;
      return t;
    }
    if (head == "enc") {
      if (argc < 2) {
        error(e.span, "E-BAD-ARITY",
              "enc takes a payload and a key (at least two arguments)");
        return std::nullopt;
      }
      // Multiple payload parts form an implicit cat; the last argument is
      // always the key.
      std::vector<Term> payload_parts;
      for (std::size_t i = 0; i + 1 < argc; ++i) {
        auto p = arg(i);
        if (!p) return std::nullopt;
        payload_parts.push_back(std::move(*p));
      }
      auto key = arg(argc - 1);
      if (!key) return std::nullopt;
      Term payload = payload_parts.size() == 1
                         ? std::move(payload_parts[0])
                         : Term::cat(std::move(payload_parts));
      Term t = Term::enc(std::move(payload), std::move(*key));
      t.span = e.span;
      return t;
    }
    error(e.span, "E-UNKNOWN-FORM",
          "unrecognized term operator `" + std::string(head) + "`");
    return std::nullopt;
  }

  void lower_skeleton(const SExpr& form) {
    if (form.children.size() < 2 || !form.children[1].is_symbol()) {
      error(form.span, "E-BAD-ARITY", "defskeleton takes a protocol name");
      return;
    }
    Skeleton s;
    s.span = form.span;
    s.protocol_name = form.children[1].text;
    for (std::size_t i = 2; i < form.children.size(); ++i) {
      const SExpr& sub = form.children[i];
      auto head = sub.head();
      if (head == "vars") {
        lower_vars(sub, s.vars);
      } else if (head == "defstrand") {
        lower_strand(sub, s.strands);
      } else if (head == "deflistener") {
        if (sub.children.size() != 2) {
          error(sub.span, "E-BAD-ARITY", "deflistener takes one term");
        } else if (auto t = lower_term(sub.children[1])) {
          s.listeners.push_back(std::move(*t));
        }
      } else if (head == "non-orig") {
        lower_term_list(sub, s.non_orig);
      } else if (head == "uniq-orig") {
        lower_term_list(sub, s.uniq_orig);
      } else {
        error(sub.span, "E-UNKNOWN-FORM",
              "unrecognized form `" + std::string(head) +
                  "` inside defskeleton");
      }
    }
    result_.unit.skeletons.push_back(std::move(s));
    result_.unit.source_order.push_back(
        {CpsaUnit::ItemKind::Skeleton, result_.unit.skeletons.size() - 1});
  }

  void lower_strand(const SExpr& form, std::vector<StrandSpec>& out) {
    if (form.children.size() < 3 || !form.children[1].is_symbol() ||
        form.children[2].kind != SExpr::Kind::Integer) {
      error(form.span, "E-BAD-ARITY",
            "defstrand takes a role name, a height, and bindings");
      return;
    }
    StrandSpec strand;
    strand.span = form.span;
    strand.role_name = form.children[1].text;
    strand.height = form.children[2].value;
    for (std::size_t i = 3; i < form.children.size(); ++i) {
      const SExpr& bind = form.children[i];
      if (!bind.is_list() || bind.children.size() != 2 ||
          !bind.children[0].is_symbol()) {
        error(bind.span, "E-BAD-ARITY", "a binding is (role-var term)");
        continue;
      }
      if (auto t = lower_term(bind.children[1]))
        strand.bindings.emplace_back(bind.children[0].text, std::move(*t));
    }
    out.push_back(std::move(strand));
  }

  LowerResult result_;
  std::optional<std::string> pending_herald_;
  std::optional<SExpr> pending_herald_form_;
};

}  // namespace

LowerResult lower(const std::vector<SExpr>& forms) {
  return Lowerer().run(forms);
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::optional<Sort> term_sort(const Term& t, const VarDecls& vars) {
  switch (t.kind) {
    case Term::Kind::Var:
      for (const auto& [id, sort] : vars)
        if (id == t.name) return sort;
      return std::nullopt;
    case Term::Kind::PubKeyOf:
    case Term::Kind::InvKeyOf:
      return Sort::Akey;
    case Term::Kind::LongTermKey:
      return Sort::Skey;
    case Term::Kind::Tag:
    case Term::Kind::Cat:
    case Term::Kind::Enc:
    case Term::Kind::Hash:
      return Sort::Mesg;
  }
  return std::nullopt;
}

namespace {

void walk(const Term& t, const std::function<void(const Term&)>& fn) {
  fn(t);
  for (const Term& a : t.args) walk(a, fn);
}

bool contains_subterm(const Term& haystack, const Term& needle) {
  if (terms_equal(haystack, needle)) return true;
  for (const Term& a : haystack.args)
    if (contains_subterm(a, needle)) return true;
  return false;
}

bool declares(const VarDecls& vars, const std::string& id) {
  for (const auto& [name, sort] : vars)
    if (name == id) return true;
  return false;
}

// All terms a role mentions, trace first.
std::vector<const Term*> role_terms(const Role& r) {
  std::vector<const Term*> out;
  for (const Event& e : r.trace) out.push_back(&e.message);
  for (const Term& t : r.uniq_orig) out.push_back(&t);
  for (const Term& t : r.non_orig) out.push_back(&t);
  return out;
}

}  // namespace

std::vector<Diagnostic> validate_protocol(const Protocol& p) {
  std::vector<Diagnostic> diags;
  auto emit = [&](Severity sev, const char* code, std::string msg,
                  const SourceSpan& span) {
    diags.push_back({sev, code, std::move(msg), span});
  };

  for (const Role& r : p.roles) {
    if (r.trace.empty())
      emit(Severity::Error, "E-EMPTY-TRACE",
           "role `" + r.name + "` has an empty trace", r.span);

    std::set<std::string> reported;
    std::set<std::string> used;
    for (const Term* root : role_terms(r)) {
      walk(*root, [&](const Term& t) {
        if (t.kind == Term::Kind::Var) {
          used.insert(t.name);
          if (!declares(r.vars, t.name) && reported.insert(t.name).second)
            emit(Severity::Error, "E-UNDECLARED-VAR",
                 "variable `" + t.name + "` is not declared in role `" +
                     r.name + "`",
                 t.span);
        }
        if (t.kind == Term::Kind::InvKeyOf) {
          auto inner = term_sort(t.args[0], r.vars);
          if (inner && *inner != Sort::Akey && *inner != Sort::Mesg)
            emit(Severity::Error, "E-INVK-SORT",
                 "invk applied to a term of sort " +
                     std::string(sort_token(*inner)),
                 t.span);
        }
        if (t.kind == Term::Kind::Enc) {
          auto key = term_sort(t.args[1], r.vars);
          if (key && (*key == Sort::Text || *key == Sort::Data))
            emit(Severity::Warning, "W-WEAK-KEY-SORT",
                 "encryption key has sort " + std::string(sort_token(*key)),
                 t.args[1].span);
        }
      });
    }

    for (const Term& orig : r.uniq_orig) {
      bool carried = false;
      for (const Event& e : r.trace)
        carried = carried || contains_subterm(e.message, orig);
      if (!carried)
        emit(Severity::Error, "E-ORIG-NOT-CARRIED",
             "uniq-orig term never appears in the trace of role `" + r.name +
                 "`",
             orig.span);
    }

    for (const auto& [id, sort] : r.vars)
      if (!used.count(id))
        emit(Severity::Warning, "W-UNUSED-VAR",
             "variable `" + id + "` is declared but never used", r.span);
  }

  sort_diagnostics(diags);
  return diags;
}

std::vector<Diagnostic> validate_skeleton(const Skeleton& s,
                                          const CpsaUnit& unit) {
  std::vector<Diagnostic> diags;
  auto emit = [&](Severity sev, const char* code, std::string msg,
                  const SourceSpan& span) {
    diags.push_back({sev, code, std::move(msg), span});
  };

  const Protocol* proto = nullptr;
  for (const Protocol& p : unit.protocols)
    if (p.name == s.protocol_name) proto = &p;
  if (!proto) {
    emit(Severity::Error, "E-NO-SUCH-PROTOCOL",
         "skeleton names unknown protocol `" + s.protocol_name + "`", s.span);
  }

  for (const StrandSpec& strand : s.strands) {
    const Role* role = nullptr;
    if (proto)
      for (const Role& r : proto->roles)
        if (r.name == strand.role_name) role = &r;
    if (proto && !role) {
      emit(Severity::Error, "E-NO-SUCH-ROLE",
           "strand names unknown role `" + strand.role_name + "`",
           strand.span);
      continue;
    }
    if (role) {
      if (strand.height < 1 ||
          strand.height > static_cast<std::int64_t>(role->trace.size()))
        emit(Severity::Error, "E-HEIGHT-EXCEEDS-TRACE",
             "strand height " + std::to_string(strand.height) +
                 " exceeds trace length " +
                 std::to_string(role->trace.size()) + " of role `" +
                 role->name + "`",
             strand.span);
      for (const auto& [var, term] : strand.bindings)
        if (!declares(role->vars, var))
          emit(Severity::Error, "E-BAD-BINDING",
               "binding target `" + var + "` is not a variable of role `" +
                   role->name + "`",
               strand.span);
    }
  }

  // Terms used by the skeleton draw from the skeleton's own vars.
  std::set<std::string> reported;
  auto check_vars = [&](const Term& root) {
    walk(root, [&](const Term& t) {
      if (t.kind == Term::Kind::Var && !declares(s.vars, t.name) &&
          reported.insert(t.name).second)
        emit(Severity::Error, "E-UNDECLARED-VAR",
             "variable `" + t.name + "` is not declared in the skeleton",
             t.span);
    });
  };
  for (const StrandSpec& strand : s.strands)
    for (const auto& [var, term] : strand.bindings) check_vars(term);
  for (const Term& t : s.listeners) check_vars(t);
  for (const Term& t : s.non_orig) check_vars(t);
  for (const Term& t : s.uniq_orig) check_vars(t);

  sort_diagnostics(diags);
  return diags;
}

namespace {

bool is_reserved(const std::string& id) {
  const auto& words = reserved_words();
  return std::find(words.begin(), words.end(), id) != words.end();
}

// Key material visible in the clear: the term itself or anything reachable
// through cat parts only. Enc protects both its payload and its key; hashes
// are one-way.
void scan_plaintext(const Term& t, const VarDecls& vars,
                    std::vector<const Term*>& hits) {
  if (t.kind == Term::Kind::Cat) {
    for (const Term& part : t.args) scan_plaintext(part, vars, hits);
    return;
  }
  if (t.kind == Term::Kind::PubKeyOf || t.kind == Term::Kind::InvKeyOf ||
      t.kind == Term::Kind::LongTermKey) {
    hits.push_back(&t);
    return;
  }
  if (t.kind == Term::Kind::Var) {
    auto sort = term_sort(t, vars);
    if (sort && (*sort == Sort::Akey || *sort == Sort::Skey))
      hits.push_back(&t);
  }
}

}  // namespace

std::vector<Diagnostic> lint(const CpsaUnit& unit) {
  std::vector<Diagnostic> diags;
  auto emit = [&](const char* code, std::string msg, const SourceSpan& span) {
    diags.push_back({Severity::Lint, code, std::move(msg), span});
  };

  auto check_shadows = [&](const VarDecls& vars, const SourceSpan& span,
                           const std::string& where) {
    for (const auto& [id, sort] : vars)
      if (is_reserved(id))
        emit("L-SHADOWS-BUILTIN",
             "variable `" + id + "` in " + where +
                 " shadows a reserved operator",
             span);
  };

  bool any_herald = false;
  for (const Protocol& p : unit.protocols) {
    any_herald = any_herald || p.herald.has_value();
    for (const Role& r : p.roles) {
      check_shadows(r.vars, r.span, "role `" + r.name + "`");
      for (const Event& e : r.trace) {
        if (e.direction != Event::Direction::Send) continue;
        std::vector<const Term*> hits;
        scan_plaintext(e.message, r.vars, hits);
        for (const Term* hit : hits)
          emit("L-PLAINTEXT-KEY",
               "role `" + r.name + "` sends key material in the clear",
               hit->span);
      }
    }
  }
  for (const Skeleton& s : unit.skeletons)
    check_shadows(s.vars, s.span, "skeleton of `" + s.protocol_name + "`");

  if (!unit.protocols.empty() && !any_herald)
    emit("L-NO-HERALD", "unit defines protocols but carries no herald",
         unit.protocols.front().span);

  sort_diagnostics(diags);
  return diags;
}

std::vector<Diagnostic> check_unit(const CpsaUnit& unit) {
  std::vector<Diagnostic> diags;
  for (const Protocol& p : unit.protocols) {
    auto d = validate_protocol(p);
    diags.insert(diags.end(), d.begin(), d.end());
  }
  for (const Skeleton& s : unit.skeletons) {
    auto d = validate_skeleton(s, unit);
    diags.insert(diags.end(), d.begin(), d.end());
  }
  auto d = lint(unit);
  diags.insert(diags.end(), d.begin(), d.end());
  sort_diagnostics(diags);
  return diags;
}

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

namespace {

SExpr term_to_sexpr(const Term& t) {
  switch (t.kind) {
    case Term::Kind::Var:
      return SExpr::symbol(t.name);
    case Term::Kind::Tag:
      return SExpr::string(t.name);
    case Term::Kind::PubKeyOf:
      return SExpr::list({SExpr::symbol("pubk"), term_to_sexpr(t.args[0])});
    case Term::Kind::InvKeyOf:
      // invk∘pubk prints back as privk.
      if (t.args[0].kind == Term::Kind::PubKeyOf)
        return SExpr::list(
            {SExpr::symbol("privk"), term_to_sexpr(t.args[0].args[0])});
      return SExpr::list({SExpr::symbol("invk"), term_to_sexpr(t.args[0])});
    case Term::Kind::LongTermKey:
      return SExpr::list({SExpr::symbol("ltk"), term_to_sexpr(t.args[0]),
                          term_to_sexpr(t.args[1])});
    case Term::Kind::Hash:
      return SExpr::list({SExpr::symbol("hash"), term_to_sexpr(t.args[0])});
    case Term::Kind::Cat: {
      std::vector<SExpr> kids{SExpr::symbol("cat")};
      for (const Term& a : t.args) kids.push_back(term_to_sexpr(a));
      return SExpr::list(std::move(kids));
    }
    case Term::Kind::Enc:
      return SExpr::list({SExpr::symbol("enc"), term_to_sexpr(t.args[0]),
                          term_to_sexpr(t.args[1])});
  }
  return SExpr::symbol("?");
}

std::string term_text(const Term& t) { return sexpr::print(term_to_sexpr(t)); }

// (vars (a b akey) (s skey)): stable partition of the ordered declarations,
// grouped by first occurrence of each sort.
std::string vars_text(const VarDecls& vars) {
  std::vector<Sort> order;
  for (const auto& [id, sort] : vars)
    if (std::find(order.begin(), order.end(), sort) == order.end())
      order.push_back(sort);
  std::string out = "(vars";
  for (Sort s : order) {
    out += " (";
    for (const auto& [id, sort] : vars)
      if (sort == s) out += id + " ";
    out += sort_token(s);
    out.push_back(')');
  }
  out.push_back(')');
  return out;
}

std::string term_list_text(const char* head, const std::vector<Term>& terms) {
  std::string out = "(";
  out += head;
  for (const Term& t : terms) out += " " + term_text(t);
  out.push_back(')');
  return out;
}

void format_role(const Role& r, std::string& out) {
  out += "  (defrole " + r.name + "\n";
  out += "    " + vars_text(r.vars) + "\n";
  out += "    (trace";
  std::string indent(11, ' ');  // aligns events under the first one
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    const Event& e = r.trace[i];
    if (i) out += "\n" + indent;
    else out.push_back(' ');
    out += "(";
    out += e.direction == Event::Direction::Send ? "send" : "recv";
    out += " " + term_text(e.message) + ")";
  }
  out += ")";
  if (!r.uniq_orig.empty())
    out += "\n    " + term_list_text("uniq-orig", r.uniq_orig);
  if (!r.non_orig.empty())
    out += "\n    " + term_list_text("non-orig", r.non_orig);
  out += ")";
}

void format_protocol(const Protocol& p, std::string& out) {
  if (p.herald) {
    out += "(herald ";
    out += sexpr::print(SExpr::string(*p.herald));
    out += ")\n\n";
  }
  out += "(defprotocol " + p.name + " " + p.algebra;
  for (const Role& r : p.roles) {
    out += "\n";
    format_role(r, out);
  }
  out += ")\n";
}

void format_skeleton(const Skeleton& s, std::string& out) {
  out += "(defskeleton " + s.protocol_name + "\n";
  out += "  " + vars_text(s.vars);
  for (const StrandSpec& strand : s.strands) {
    out += "\n  (defstrand " + strand.role_name + " " +
           std::to_string(strand.height);
    for (const auto& [var, term] : strand.bindings)
      out += " (" + var + " " + term_text(term) + ")";
    out += ")";
  }
  for (const Term& t : s.listeners)
    out += "\n  (deflistener " + term_text(t) + ")";
  if (!s.non_orig.empty()) out += "\n  " + term_list_text("non-orig", s.non_orig);
  if (!s.uniq_orig.empty())
    out += "\n  " + term_list_text("uniq-orig", s.uniq_orig);
  out += ")\n";
}

}  // namespace

std::string format_unit(const CpsaUnit& unit) {
  std::string out;
  auto separate = [&] {
    if (!out.empty()) out += "\n";
  };

  std::vector<bool> skeleton_done(unit.skeletons.size(), false);
  for (const Protocol& p : unit.protocols) {
    separate();
    format_protocol(p, out);
    for (std::size_t i = 0; i < unit.skeletons.size(); ++i) {
      if (skeleton_done[i] || unit.skeletons[i].protocol_name != p.name)
        continue;
      skeleton_done[i] = true;
      separate();
      format_skeleton(unit.skeletons[i], out);
    }
  }
  for (std::size_t i = 0; i < unit.skeletons.size(); ++i) {
    if (skeleton_done[i]) continue;
    separate();
    format_skeleton(unit.skeletons[i], out);
  }
  for (const SExpr& raw : unit.raw_forms) {
    separate();
    out += sexpr::print(raw, sexpr::PrintStyle::indented(72));
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Equality
// ---------------------------------------------------------------------------

bool terms_equal(const Term& a, const Term& b) {
  if (a.kind != b.kind || a.name != b.name ||
      a.args.size() != b.args.size())
    return false;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!terms_equal(a.args[i], b.args[i])) return false;
  return true;
}

namespace {

// Canonical formatting groups declarations by sort, so equality treats the
// vars list as a map rather than an ordered sequence.
bool var_decls_equal(const VarDecls& a, const VarDecls& b) {
  VarDecls sa = a, sb = b;
  auto by_id = [](const auto& x, const auto& y) { return x.first < y.first; };
  std::sort(sa.begin(), sa.end(), by_id);
  std::sort(sb.begin(), sb.end(), by_id);
  return sa == sb;
}

bool term_vectors_equal(const std::vector<Term>& a,
                        const std::vector<Term>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!terms_equal(a[i], b[i])) return false;
  return true;
}

bool roles_equal(const Role& a, const Role& b) {
  if (a.name != b.name || !var_decls_equal(a.vars, b.vars) ||
      a.trace.size() != b.trace.size())
    return false;
  for (std::size_t i = 0; i < a.trace.size(); ++i)
    if (a.trace[i].direction != b.trace[i].direction ||
        !terms_equal(a.trace[i].message, b.trace[i].message))
      return false;
  return term_vectors_equal(a.uniq_orig, b.uniq_orig) &&
         term_vectors_equal(a.non_orig, b.non_orig);
}

bool skeletons_equal(const Skeleton& a, const Skeleton& b) {
  if (a.protocol_name != b.protocol_name || !var_decls_equal(a.vars, b.vars) ||
      a.strands.size() != b.strands.size())
    return false;
  for (std::size_t i = 0; i < a.strands.size(); ++i) {
    const auto& sa = a.strands[i];
    const auto& sb = b.strands[i];
    if (sa.role_name != sb.role_name || sa.height != sb.height ||
        sa.bindings.size() != sb.bindings.size())
      return false;
    for (std::size_t j = 0; j < sa.bindings.size(); ++j)
      if (sa.bindings[j].first != sb.bindings[j].first ||
          !terms_equal(sa.bindings[j].second, sb.bindings[j].second))
        return false;
  }
  return term_vectors_equal(a.listeners, b.listeners) &&
         term_vectors_equal(a.non_orig, b.non_orig) &&
         term_vectors_equal(a.uniq_orig, b.uniq_orig);
}

}  // namespace

bool units_equal(const CpsaUnit& a, const CpsaUnit& b) {
  if (a.protocols.size() != b.protocols.size() ||
      a.skeletons.size() != b.skeletons.size() ||
      a.raw_forms.size() != b.raw_forms.size())
    return false;
  for (std::size_t i = 0; i < a.protocols.size(); ++i) {
    const Protocol& pa = a.protocols[i];
    const Protocol& pb = b.protocols[i];
    if (pa.name != pb.name || pa.algebra != pb.algebra ||
        pa.herald != pb.herald || pa.roles.size() != pb.roles.size())
      return false;
    for (std::size_t j = 0; j < pa.roles.size(); ++j)
      if (!roles_equal(pa.roles[j], pb.roles[j])) return false;
  }
  for (std::size_t i = 0; i < a.skeletons.size(); ++i)
    if (!skeletons_equal(a.skeletons[i], b.skeletons[i])) return false;
  for (std::size_t i = 0; i < a.raw_forms.size(); ++i)
    if (!sexpr::structurally_equal(a.raw_forms[i], b.raw_forms[i]))
      return false;
  return true;
}

}  // namespace protoforge::cpsa
