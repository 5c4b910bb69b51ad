#include "protoforge/sexpr.hpp"

#include <charconv>
#include <sstream>

namespace protoforge::sexpr {

SExpr SExpr::symbol(std::string s) {
  SExpr e;
  e.kind = Kind::Symbol;
  e.text = std::move(s);
  return e;
}

SExpr SExpr::string(std::string s) {
  SExpr e;
  e.kind = Kind::String;
  e.text = std::move(s);
  return e;
}

SExpr SExpr::integer(std::int64_t v) {
  SExpr e;
  e.kind = Kind::Integer;
  e.value = v;
  return e;
}

SExpr SExpr::list(std::vector<SExpr> items) {
  SExpr e;
  e.kind = Kind::List;
  e.children = std::move(items);
  return e;
}

std::string_view SExpr::head() const {
  if (kind == Kind::List && !children.empty() && children[0].is_symbol())
    return children[0].text;
  return {};
}

namespace {

bool is_symbol_char(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  if (u <= ' ') return false;
  return c != '(' && c != ')' && c != '"' && c != ';';
}

bool is_ws(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

struct Cursor {
  std::string_view text;
  std::size_t pos = 0;
  std::size_t line = 1;
  std::size_t column = 1;

  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }

  void advance() {
    if (text[pos] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
    ++pos;
  }

  SourceSpan here() const { return {pos, pos, line, column}; }
};

class Parser {
 public:
  explicit Parser(std::string_view text) : cur_{text} {}

  ParseOutcome run() {
    ParseOutcome out;
    while (true) {
      skip_trivia(out.diagnostics);
      if (cur_.done()) break;
      char c = cur_.peek();
      if (c == ')') {
        Diagnostic d;
        d.code = "E-UNBALANCED-CLOSE";
        d.message = "stray `)` with no matching `(`";
        d.span = cur_.here();
        d.span.end_byte = d.span.start_byte + 1;
        out.diagnostics.push_back(std::move(d));
        cur_.advance();
        continue;
      }
      bool ok = true;
      SExpr form = read_form(out.diagnostics, 0, ok);
      if (ok) out.forms.push_back(std::move(form));
    }
    return out;
  }

 private:
  void skip_trivia(std::vector<Diagnostic>& diags) {
    while (!cur_.done()) {
      char c = cur_.peek();
      if (is_ws(c)) {
        cur_.advance();
      } else if (c == ';') {
        while (!cur_.done() && cur_.peek() != '\n') cur_.advance();
      } else if (static_cast<unsigned char>(c) < 0x20) {
        Diagnostic d;
        d.code = "E-INVALID-CHAR";
        d.message = "control byte cannot appear outside a string";
        d.span = cur_.here();
        d.span.end_byte = d.span.start_byte + 1;
        diags.push_back(std::move(d));
        cur_.advance();
      } else {
        break;
      }
    }
  }

  // Reads one form. `ok` is cleared when the form must be dropped (unclosed
  // list or depth overflow); diagnostics are emitted either way.
  SExpr read_form(std::vector<Diagnostic>& diags, std::size_t depth,
                  bool& ok) {
    char c = cur_.peek();
    if (c == '(') return read_list(diags, depth, ok);
    if (c == '"') return read_string(diags, ok);
    return read_atom();
  }

  SExpr read_list(std::vector<Diagnostic>& diags, std::size_t depth,
                  bool& ok) {
    SourceSpan open = cur_.here();
    open.end_byte = open.start_byte + 1;
    cur_.advance();

    if (depth + 1 > kMaxNestingDepth) {
      Diagnostic d;
      d.code = "E-MAX-DEPTH";
      d.message = "list nesting exceeds depth limit";
      d.span = open;
      diags.push_back(std::move(d));
      skip_balanced_rest();
      ok = false;
      return {};
    }

    SExpr list;
    list.kind = SExpr::Kind::List;
    list.span = open;
    while (true) {
      skip_trivia(diags);
      if (cur_.done()) {
        Diagnostic d;
        d.code = "E-UNBALANCED-OPEN";
        d.message = "list opened here is never closed";
        d.span = open;
        diags.push_back(std::move(d));
        ok = false;
        return {};
      }
      if (cur_.peek() == ')') {
        list.span.end_byte = cur_.pos + 1;
        cur_.advance();
        break;
      }
      bool child_ok = true;
      SExpr child = read_form(diags, depth + 1, child_ok);
      if (child_ok) list.children.push_back(std::move(child));
    }
    return list;
  }

  // Consumes input up to and including the `)` matching an already-consumed
  // `(`, ignoring structure beyond strings and comments.
  void skip_balanced_rest() {
    std::size_t depth = 1;
    while (!cur_.done() && depth > 0) {
      char c = cur_.peek();
      if (c == ';') {
        while (!cur_.done() && cur_.peek() != '\n') cur_.advance();
        continue;
      }
      if (c == '"') {
        cur_.advance();
        while (!cur_.done()) {
          char s = cur_.peek();
          cur_.advance();
          if (s == '\\' && !cur_.done())
            cur_.advance();
          else if (s == '"')
            break;
        }
        continue;
      }
      if (c == '(') ++depth;
      if (c == ')') --depth;
      cur_.advance();
    }
  }

  SExpr read_string(std::vector<Diagnostic>& diags, bool& ok) {
    SourceSpan span = cur_.here();
    cur_.advance();
    std::string out;
    while (true) {
      if (cur_.done()) {
        Diagnostic d;
        d.code = "E-UNTERMINATED-STRING";
        d.message = "string opened here has no closing quote";
        d.span = span;
        d.span.end_byte = span.start_byte + 1;
        diags.push_back(std::move(d));
        ok = false;
        return {};
      }
      char c = cur_.peek();
      cur_.advance();
      if (c == '"') break;
      if (c == '\\') {
        if (cur_.done()) continue;  // reported as unterminated next loop
        out.push_back(cur_.peek());
        cur_.advance();
      } else {
        out.push_back(c);
      }
    }
    SExpr e = SExpr::string(std::move(out));
    span.end_byte = cur_.pos;
    e.span = span;
    return e;
  }

  SExpr read_atom() {
    SourceSpan span = cur_.here();
    std::string token;
    while (!cur_.done() && is_symbol_char(cur_.peek())) {
      token.push_back(cur_.peek());
      cur_.advance();
    }
    span.end_byte = cur_.pos;

    std::int64_t value = 0;
    std::size_t digits_from = (token[0] == '+' || token[0] == '-') ? 1 : 0;
    bool numeric = token.size() > digits_from;
    for (std::size_t i = digits_from; i < token.size(); ++i)
      numeric = numeric && token[i] >= '0' && token[i] <= '9';
    if (numeric) {
      // from_chars rejects a leading '+', so parse digits and re-apply sign.
      auto [ptr, ec] = std::from_chars(token.data() + digits_from,
                                       token.data() + token.size(), value);
      if (token[0] == '-') value = -value;
      if (ec == std::errc() && ptr == token.data() + token.size()) {
        SExpr e = SExpr::integer(value);
        e.span = span;
        return e;
      }
    }
    SExpr e = SExpr::symbol(std::move(token));
    e.span = span;
    return e;
  }

  Cursor cur_;
};

}  // namespace

ParseOutcome parse(std::string_view text) { return Parser(text).run(); }

namespace {

void escape_string_into(const std::string& s, std::string& out) {
  out.push_back('"');
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
}

void print_compact_into(const SExpr& e, std::string& out) {
  switch (e.kind) {
    case SExpr::Kind::Symbol:
      out += e.text;
      break;
    case SExpr::Kind::String:
      escape_string_into(e.text, out);
      break;
    case SExpr::Kind::Integer:
      out += std::to_string(e.value);
      break;
    case SExpr::Kind::List:
      out.push_back('(');
      for (std::size_t i = 0; i < e.children.size(); ++i) {
        if (i) out.push_back(' ');
        print_compact_into(e.children[i], out);
      }
      out.push_back(')');
      break;
  }
}

bool is_atom(const SExpr& e) { return e.kind != SExpr::Kind::List; }

void print_indented_into(const SExpr& e, std::size_t indent, std::size_t width,
                         std::string& out) {
  std::string flat;
  print_compact_into(e, flat);
  if (is_atom(e) || indent + flat.size() <= width) {
    out += flat;
    return;
  }
  // Leading atoms stay on the head line; remaining children each get a line.
  out.push_back('(');
  std::size_t i = 0;
  while (i < e.children.size() && is_atom(e.children[i])) {
    if (i) out.push_back(' ');
    print_compact_into(e.children[i], out);
    ++i;
  }
  for (; i < e.children.size(); ++i) {
    out.push_back('\n');
    out.append(indent + 2, ' ');
    print_indented_into(e.children[i], indent + 2, width, out);
  }
  out.push_back(')');
}

}  // namespace

std::string print(const SExpr& form, PrintStyle style) {
  std::string out;
  if (style.mode == PrintStyle::Mode::Compact)
    print_compact_into(form, out);
  else
    print_indented_into(form, 0, style.width, out);
  return out;
}

bool structurally_equal(const SExpr& a, const SExpr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case SExpr::Kind::Symbol:
    case SExpr::Kind::String:
      return a.text == b.text;
    case SExpr::Kind::Integer:
      return a.value == b.value;
    case SExpr::Kind::List:
      if (a.children.size() != b.children.size()) return false;
      for (std::size_t i = 0; i < a.children.size(); ++i)
        if (!structurally_equal(a.children[i], b.children[i])) return false;
      return true;
  }
  return false;
}

namespace {

std::vector<std::string> fenced_regions(std::string_view prose) {
  std::vector<std::string> blocks;
  std::size_t pos = 0;
  while (true) {
    std::size_t open = prose.find("```", pos);
    if (open == std::string_view::npos) break;
    std::size_t content = prose.find('\n', open + 3);
    if (content == std::string_view::npos) break;
    ++content;  // past the info-string line
    std::size_t close = prose.find("```", content);
    if (close == std::string_view::npos) break;
    std::string_view body = prose.substr(content, close - content);
    if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
    blocks.emplace_back(body);
    pos = close + 3;
  }
  return blocks;
}

std::vector<std::string> raw_scan_regions(std::string_view prose) {
  std::vector<std::string> regions;
  std::size_t depth = 0;
  std::size_t start = 0;
  bool in_string = false;
  bool in_comment = false;
  for (std::size_t i = 0; i < prose.size(); ++i) {
    char c = prose[i];
    if (in_comment) {
      if (c == '\n') in_comment = false;
      continue;
    }
    if (in_string) {
      if (c == '\\')
        ++i;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (depth > 0 && c == ';') {
      in_comment = true;
    } else if (depth > 0 && c == '"') {
      in_string = true;
    } else if (c == '(') {
      if (depth == 0) start = i;
      ++depth;
    } else if (c == ')' && depth > 0) {
      --depth;
      if (depth == 0)
        regions.emplace_back(prose.substr(start, i + 1 - start));
    }
  }
  return regions;
}

}  // namespace

std::vector<ExtractedBlock> extract_blocks(std::string_view prose) {
  std::vector<ExtractedBlock> out;
  auto fenced = fenced_regions(prose);
  // A fence counts as structured only if it holds at least one list form;
  // bare prose words would otherwise pass as symbols.
  bool any_parses = false;
  for (const auto& block : fenced)
    for (const auto& form : parse(block).forms)
      any_parses = any_parses || form.is_list();
  if (any_parses) {
    for (auto& block : fenced)
      out.push_back({std::move(block), ExtractedBlock::Origin::Fenced});
    return out;
  }
  for (auto& region : raw_scan_regions(prose))
    out.push_back({std::move(region), ExtractedBlock::Origin::RawScan});
  return out;
}

}  // namespace protoforge::sexpr
