#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <string>
#include <vector>

#include "protoforge/sexpr.hpp"
#include "support.hpp"

using namespace protoforge;
using namespace protoforge::sexpr;

namespace {

// Independent oracle: net parenthesis depth of a text, ignoring strings and
// comments. Positive result means that many opens are unclosed.
int paren_balance(const std::string& text) {
  int depth = 0;
  bool in_string = false, in_comment = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_comment) {
      if (c == '\n') in_comment = false;
    } else if (in_string) {
      if (c == '\\')
        ++i;
      else if (c == '"')
        in_string = false;
    } else if (c == ';') {
      in_comment = true;
    } else if (c == '"') {
      in_string = true;
    } else if (c == '(') {
      ++depth;
    } else if (c == ')') {
      --depth;
    }
  }
  return depth;
}

// Brute-force oracle for raw-scan extraction: every maximal balanced region
// beginning with `(`.
std::vector<std::string> balanced_regions_oracle(const std::string& text) {
  std::vector<std::string> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '(') {
      if (depth == 0) start = i;
      ++depth;
    } else if (text[i] == ')' && depth > 0) {
      if (--depth == 0) out.push_back(text.substr(start, i + 1 - start));
    }
  }
  return out;
}

SExpr random_tree(std::mt19937& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 3);
  switch (pick(rng)) {
    case 0: {
      static const char* syms[] = {"a",    "bc",   "enc",  "init-2",
                                   "x*y",  "+foo", "n1",   "resp"};
      return SExpr::symbol(syms[rng() % 8]);
    }
    case 1: {
      std::uniform_int_distribution<int> len(0, 12);
      std::string s;
      int n = len(rng);
      for (int i = 0; i < n; ++i) {
        static const char pool[] = "ab \"\\;()\nxyz";
        s.push_back(pool[rng() % (sizeof(pool) - 1)]);
      }
      return SExpr::string(s);
    }
    case 2:
      return SExpr::integer(static_cast<std::int64_t>(rng()) - 2147483648LL);
    default: {
      std::uniform_int_distribution<int> n(0, 4);
      std::vector<SExpr> kids;
      int count = n(rng);
      for (int i = 0; i < count; ++i)
        kids.push_back(random_tree(rng, depth - 1));
      return SExpr::list(std::move(kids));
    }
  }
}

}  // namespace

TEST_CASE("parse minimal nesting") {
  auto out = parse("(a (b c))");
  REQUIRE(out.forms.size() == 1);
  CHECK(out.diagnostics.empty());
  const SExpr& f = out.forms[0];
  REQUIRE(f.is_list());
  REQUIRE(f.children.size() == 2);
  CHECK(f.children[0].is_symbol("a"));
  REQUIRE(f.children[1].is_list());
  CHECK(f.children[1].children[0].is_symbol("b"));
  CHECK(f.children[1].children[1].is_symbol("c"));
}

TEST_CASE("parse blanchet fixture: three clean top-level forms") {
  auto text = testsupport::fixture("blanchet.scm");
  auto out = parse(text);
  CHECK(out.diagnostics.empty());
  REQUIRE(out.forms.size() == 3);
  CHECK(out.forms[0].head() == "defprotocol");
  CHECK(out.forms[1].head() == "defskeleton");
  CHECK(out.forms[2].head() == "defskeleton");
}

TEST_CASE("parse truncated mutual-auth fixture: one unbalanced open") {
  auto text = testsupport::fixture("mutual-auth-incomplete.scm");
  // Oracle first: the text is short exactly one closing delimiter.
  REQUIRE(paren_balance(text) == 1);

  auto out = parse(text);
  REQUIRE(out.forms.size() == 1);
  CHECK(out.forms[0].head() == "herald");
  REQUIRE(out.diagnostics.size() == 1);
  CHECK(out.diagnostics[0].code == "E-UNBALANCED-OPEN");
  // The diagnostic points at the defprotocol open paren.
  CHECK(text.substr(out.diagnostics[0].span.start_byte, 12) == "(defprotocol");
}

TEST_CASE("comments and atom kinds") {
  auto out = parse("; heading\n(x \"s\" 42 -7 +3 4x)\n");
  REQUIRE(out.forms.size() == 1);
  const auto& kids = out.forms[0].children;
  REQUIRE(kids.size() == 6);
  CHECK(kids[0].kind == SExpr::Kind::Symbol);
  CHECK(kids[1].kind == SExpr::Kind::String);
  CHECK(kids[2].value == 42);
  CHECK(kids[3].value == -7);
  CHECK(kids[4].value == 3);
  CHECK(kids[5].is_symbol("4x"));
}

TEST_CASE("error diagnostics for malformed input") {
  SUBCASE("stray close") {
    auto out = parse("(a) ) (b)");
    CHECK(out.forms.size() == 2);
    REQUIRE(out.diagnostics.size() == 1);
    CHECK(out.diagnostics[0].code == "E-UNBALANCED-CLOSE");
    CHECK(out.diagnostics[0].span.start_byte == 4);
  }
  SUBCASE("one diagnostic per unclosed frame") {
    auto out = parse("(a (b (c)");
    CHECK(out.forms.empty());
    REQUIRE(out.diagnostics.size() == 2);
    CHECK(out.diagnostics[0].code == "E-UNBALANCED-OPEN");
    CHECK(out.diagnostics[1].code == "E-UNBALANCED-OPEN");
  }
  SUBCASE("unterminated string") {
    auto out = parse("(a \"oops");
    REQUIRE(out.diagnostics.size() == 2);
    CHECK(out.diagnostics[0].code == "E-UNTERMINATED-STRING");
    CHECK(out.diagnostics[1].code == "E-UNBALANCED-OPEN");
  }
  SUBCASE("depth limit") {
    std::string deep(300, '(');
    deep += "x";
    deep.append(300, ')');
    auto out = parse(deep);
    bool saw_depth = false;
    for (const auto& d : out.diagnostics)
      saw_depth = saw_depth || d.code == "E-MAX-DEPTH";
    CHECK(saw_depth);
  }
}

TEST_CASE("error positioning property: single stray close") {
  std::mt19937 rng(7);
  for (int i = 0; i < 100; ++i) {
    // Balanced text with one `)` injected at a random gap between forms.
    std::string base = "(a b) (c (d)) e ";
    std::uniform_int_distribution<std::size_t> at(0, base.size());
    std::size_t k = at(rng);
    // Avoid injecting inside a form: only positions where depth is zero.
    if (paren_balance(base.substr(0, k)) != 0) continue;
    std::string text = base.substr(0, k) + ")" + base.substr(k);
    auto out = parse(text);
    REQUIRE(out.diagnostics.size() == 1);
    CHECK(out.diagnostics[0].code == "E-UNBALANCED-CLOSE");
    CHECK(out.diagnostics[0].span.start_byte == k);
  }
}

TEST_CASE("print compact basics") {
  CHECK(print(SExpr::list({SExpr::symbol("a")})) == "(a)");
  // Embedded quote round-trips through escaping.
  auto printed = print(SExpr::string("x\"y"));
  CHECK(printed == "\"x\\\"y\"");
  auto back = parse(printed);
  REQUIRE(back.forms.size() == 1);
  CHECK(back.forms[0].text == "x\"y");
}

TEST_CASE("indented print of blanchet re-parses identically") {
  auto text = testsupport::fixture("blanchet.scm");
  auto out = parse(text);
  REQUIRE(out.forms.size() == 3);
  for (const auto& form : out.forms) {
    auto pretty = print(form, PrintStyle::indented(72));
    auto again = parse(pretty);
    REQUIRE(again.forms.size() == 1);
    CHECK(structurally_equal(again.forms[0], form));
  }
}

TEST_CASE("round-trip property over random trees") {
  std::mt19937 rng(42);
  for (int i = 0; i < 1000; ++i) {
    SExpr t = random_tree(rng, 8);
    for (auto style : {PrintStyle::compact(), PrintStyle::indented(40)}) {
      auto text = print(t, style);
      auto out = parse(text);
      REQUIRE(out.diagnostics.empty());
      REQUIRE(out.forms.size() == 1);
      CHECK(structurally_equal(out.forms[0], t));
    }
    // Idempotence of print∘parse.
    auto once = print(t, PrintStyle::indented(40));
    auto twice = print(parse(once).forms[0], PrintStyle::indented(40));
    CHECK(once == twice);
  }
}

TEST_CASE("parse survives arbitrary printable input") {
  std::mt19937 rng(99);
  for (int i = 0; i < 2000; ++i) {
    std::uniform_int_distribution<int> len(0, 120);
    std::string junk;
    int n = len(rng);
    for (int j = 0; j < n; ++j)
      junk.push_back(static_cast<char>(rng() % 95 + 32));
    auto out = parse(junk);  // must not crash
    for (const auto& f : out.forms) (void)print(f);
  }
}

TEST_CASE("extract_blocks: fenced") {
  auto blocks =
      extract_blocks("Here is the model:\n```\n(defprotocol p basic)\n```");
  REQUIRE(blocks.size() == 1);
  CHECK(blocks[0].text == "(defprotocol p basic)");
  CHECK(blocks[0].origin == ExtractedBlock::Origin::Fenced);
}

TEST_CASE("extract_blocks: language-tagged fence") {
  auto blocks = extract_blocks("```scheme\n(a b)\n(c)\n```\ntrailing prose");
  REQUIRE(blocks.size() == 1);
  CHECK(blocks[0].text == "(a b)\n(c)");
}

TEST_CASE("extract_blocks: no structured content") {
  CHECK(extract_blocks("plain text, nothing here.").empty());
}

TEST_CASE("extract_blocks: raw scan fallback, source order") {
  std::string prose = "First (a (b)) then later (c) done.";
  auto blocks = extract_blocks(prose);
  auto expected = balanced_regions_oracle(prose);
  REQUIRE(blocks.size() == expected.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    CHECK(blocks[i].text == expected[i]);
    CHECK(blocks[i].origin == ExtractedBlock::Origin::RawScan);
  }
}

TEST_CASE("extract_blocks: fence without sexpr falls back to raw scan") {
  std::string prose = "```\nnot lisp at all\n```\nbut (x y) inline";
  auto blocks = extract_blocks(prose);
  REQUIRE(blocks.size() == 1);
  CHECK(blocks[0].text == "(x y)");
  CHECK(blocks[0].origin == ExtractedBlock::Origin::RawScan);
}
