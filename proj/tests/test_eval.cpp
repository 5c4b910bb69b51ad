#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <random>

#include "protoforge/context.hpp"
#include "protoforge/cpsa.hpp"
#include "protoforge/eval.hpp"
#include "protoforge/sexpr.hpp"
#include "support.hpp"

using namespace protoforge;
using namespace protoforge::eval;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

// Independent error count for a text the scorer will treat as one block.
std::size_t error_count_oracle(const std::string& text) {
  auto parsed = sexpr::parse(text);
  auto lowered = cpsa::lower(parsed.forms);
  return count_errors(parsed.diagnostics) + count_errors(lowered.diagnostics) +
         count_errors(cpsa::check_unit(lowered.unit));
}

// Reference Levenshtein distance, full matrix (small inputs only).
std::size_t levenshtein_oracle(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1,
                                          std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return d[a.size()][b.size()];
}

std::string repaired_incomplete() {
  return testsupport::fixture("mutual-auth-incomplete.scm") + ")";
}

GoldChecklist mutual_auth_checklist() {
  GoldChecklist gold;
  gold.query_id = "q1";
  gold.expected_role_count = 2;
  gold.expected_variables = {"a", "b", "n1", "n2"};
  gold.expected_event_counts = {{0, 3}};
  gold.required_operators = {cpsa::Term::Kind::Enc, cpsa::Term::Kind::PubKeyOf,
                             cpsa::Term::Kind::Cat};
  return gold;
}

const fs::path kDataDir = PROTOFORGE_DATA_DIR;

}  // namespace

TEST_CASE("similarity matches the reference edit distance") {
  auto sim_oracle = [](const std::string& a, const std::string& b) {
    if (a.empty() && b.empty()) return 1.0;
    return 1.0 - static_cast<double>(levenshtein_oracle(a, b)) /
                     static_cast<double>(std::max(a.size(), b.size()));
  };
  CHECK(text_similarity("abc", "abc") == 1.0);
  CHECK(text_similarity("abc", "xyz") == doctest::Approx(0.0));
  std::mt19937 rng(11);
  for (int i = 0; i < 50; ++i) {
    auto random_string = [&] {
      std::string s;
      for (int n = static_cast<int>(rng() % 30); n > 0; --n)
        s.push_back("ab() \n"[rng() % 6]);
      return s;
    };
    std::string a = random_string(), b = random_string();
    CHECK(text_similarity(a, b) == doctest::Approx(sim_oracle(a, b)));
  }
}

TEST_CASE("correctness scoring") {
  SUBCASE("clean definition scores 1.0") {
    CHECK(score_correctness(testsupport::fixture("blanchet.scm")) == 1.0);
  }
  SUBCASE("free prose scores 0.0") {
    CHECK(score_correctness("There is no definition here, only words.") ==
          0.0);
  }
  SUBCASE("repaired generated output scores 1/(1+E)") {
    std::string text = repaired_incomplete();
    std::size_t e = error_count_oracle(text);
    CHECK(score_correctness(text) ==
          doctest::Approx(1.0 / (1.0 + static_cast<double>(e))));
    // Warnings and lints must not reduce the score: the repaired text has
    // findings (shadowed builtin) but zero errors.
    REQUIRE(e == 0);
    CHECK(score_correctness(text) == 1.0);
  }
  SUBCASE("a fenced block inside prose is still found") {
    std::string text = "Here is the definition:\n\n```\n" +
                       testsupport::fixture("blanchet.scm") + "\n```\n";
    CHECK(score_correctness(text) == 1.0);
  }
}

TEST_CASE("clarity scoring") {
  std::string blanchet = testsupport::fixture("blanchet.scm");

  SUBCASE("canonical text with a herald scores 1.0") {
    auto lowered = cpsa::lower(sexpr::parse(blanchet).forms);
    lowered.unit.protocols[0].herald = "Blanchet's Simple Example Protocol";
    CHECK(score_clarity(cpsa::format_unit(lowered.unit)) == 1.0);
  }
  SUBCASE("unparseable text scores 0.0") {
    CHECK(score_clarity("((((") == 0.0);
    CHECK(score_clarity("") == 0.0);
  }
  SUBCASE("verbatim corpus text without a herald scores 0.75") {
    CHECK(score_clarity(blanchet) == 0.75);
  }
  SUBCASE("an overlong line fails exactly one check") {
    auto lowered = cpsa::lower(sexpr::parse(blanchet).forms);
    lowered.unit.protocols[0].herald = "t";
    std::string canonical = cpsa::format_unit(lowered.unit);
    std::string padded = canonical + "\n; " + std::string(120, 'x') + "\n";
    CHECK(score_clarity(padded) == doctest::Approx(0.75));
  }
}

TEST_CASE("completeness scoring") {
  GoldChecklist gold = mutual_auth_checklist();

  SUBCASE("partial output covers 8 of 9 items") {
    // Oracle, item by item: role count misses (one role, not two); all four
    // variables are declared; the first role has three events; all three
    // operators occur. (0 + 4 + 1 + 3) / 9.
    double score = score_completeness(repaired_incomplete(), gold);
    CHECK(score == doctest::Approx(8.0 / 9.0));
  }
  SUBCASE("the reference definition itself scores 1.0") {
    std::string reference =
        testsupport::read_file((kDataDir / "seeds" /
                                "mutual-auth-pubk.scm").string());
    GoldChecklist full = gold;
    full.expected_event_counts = {{0, 3}, {1, 3}};
    CHECK(score_completeness(reference, full) == 1.0);
  }
  SUBCASE("empty output scores 0.0") {
    CHECK(score_completeness("", gold) == 0.0);
  }
}

TEST_CASE("scores are bounded for arbitrary input") {
  std::mt19937 rng(77);
  GoldChecklist gold = mutual_auth_checklist();
  for (int i = 0; i < 500; ++i) {
    std::string bytes;
    for (int n = static_cast<int>(rng() % 120); n > 0; --n)
      bytes.push_back(static_cast<char>(' ' + rng() % 95));
    CAPTURE(bytes);
    for (double s : {score_correctness(bytes), score_clarity(bytes),
                     score_completeness(bytes, gold)}) {
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
    }
  }
}

TEST_CASE("correctness never rises when an error is injected") {
  // Mutant generator: delete one variable declaration from a clean seed,
  // which induces undeclared-variable errors.
  auto seeds_dir = kDataDir / "seeds";
  std::vector<std::string> texts;
  for (const auto& entry : fs::directory_iterator(seeds_dir))
    if (entry.path().extension() == ".scm")
      texts.push_back(testsupport::read_file(entry.path().string()));
  REQUIRE(texts.size() == 10);

  int mutants = 0;
  for (const auto& text : texts) {
    auto lowered = cpsa::lower(sexpr::parse(text).forms);
    double base = score_correctness(text);
    for (std::size_t r = 0; r < lowered.unit.protocols[0].roles.size(); ++r) {
      auto& role = lowered.unit.protocols[0].roles[r];
      for (std::size_t v = 0; v < role.vars.size(); ++v) {
        auto mutated = lowered.unit;
        auto& vars = mutated.protocols[0].roles[r].vars;
        vars.erase(vars.begin() + static_cast<long>(v));
        std::string mutant = cpsa::format_unit(mutated);
        if (error_count_oracle(mutant) == 0) continue;  // not an error mutant
        ++mutants;
        CAPTURE(mutant);
        CHECK(score_correctness(mutant) <= base);
      }
    }
  }
  CHECK(mutants >= 30);
}

TEST_CASE("completeness never drops when a missing variable is added") {
  GoldChecklist gold = mutual_auth_checklist();
  gold.expected_variables.insert("extra");

  std::string base_text = repaired_incomplete();
  double base = score_completeness(base_text, gold);

  // Add the missing expected variable as a declaration.
  auto lowered = cpsa::lower(sexpr::parse(base_text).forms);
  lowered.unit.protocols[0].roles[0].vars.push_back(
      {"extra", cpsa::Sort::Text});
  std::string improved = cpsa::format_unit(lowered.unit);
  CHECK(score_completeness(improved, gold) >= base);
}

TEST_CASE("suite file loads with well-formed checklists") {
  auto suite = load_suite(kDataDir / "eval" / "suite.json");
  REQUIRE(suite.size() == 3);
  for (const auto& q : suite) {
    CAPTURE(q.query_id);
    CHECK_FALSE(q.query_text.empty());
    CHECK(q.checklist.expected_role_count >= 1);
    for (const auto& [index, count] : q.checklist.expected_event_counts)
      CHECK(index < q.checklist.expected_role_count);
  }
}

TEST_CASE("eval run over the shipped suite and five replay backends") {
  auto suite = load_suite(kDataDir / "eval" / "suite.json");
  auto registry =
      context::TemplateRegistry::load(kDataDir / "templates");

  // Reference answers: the seed definitions the suite queries describe.
  std::map<std::string, std::string> answers = {
      {"q1-mutual-auth",
       testsupport::read_file((kDataDir / "seeds" /
                               "mutual-auth-pubk.scm").string())},
      {"q2-key-transport",
       testsupport::read_file((kDataDir / "seeds" /
                               "signed-key-transport.scm").string())},
      {"q3-sym-challenge",
       testsupport::read_file((kDataDir / "seeds" /
                               "iso-sym-challenge.scm").string())},
  };

  fs::path dir = fs::temp_directory_path() /
                 ("pf-ev-" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);

  // Five models of descending quality; model-e has an empty cassette so its
  // rows exercise the failure path.
  auto respond = [&](const std::string& model,
                     const std::string& query_id) -> std::string {
    if (model == "model-a") return answers.at(query_id);
    if (model == "model-b")
      return "Here you go:\n\n```\n" + answers.at(query_id) + "\n```\n";
    if (model == "model-c") return repaired_incomplete();
    return "I am sorry, I can only answer questions about cooking.";
  };

  std::vector<gateway::BackendHandle> backends;
  for (std::string model : {"model-a", "model-b", "model-c", "model-d"}) {
    auto cassette = gateway::Cassette::empty(dir / (model + ".jsonl"));
    for (const auto& q : suite) {
      auto ctx = context::build_context(q.query_text, "default", registry);
      gateway::GenerationRequest request;
      request.model_id = model;
      request.messages = {{gateway::ChatMessage::Role::User, ctx.text}};
      cassette.put({gateway::request_digest(request), model, 0.0,
                    respond(model, q.query_id), 0, 0});
    }
    backends.push_back(std::make_shared<gateway::ReplayBackend>(
        model, gateway::Cassette::load(dir / (model + ".jsonl"))));
  }
  backends.push_back(std::make_shared<gateway::ReplayBackend>(
      "model-e", gateway::Cassette::empty(dir / "model-e.jsonl")));

  auto report = run_eval(suite, backends, registry, "default");

  CHECK(report.rows.size() == 15);  // 3 queries x 5 models
  std::set<std::pair<std::string, std::string>> cells;
  for (const auto& row : report.rows)
    CHECK(cells.insert({row.query_id, row.model_id}).second);
  CHECK(std::is_sorted(report.rows.begin(), report.rows.end(),
                       [](const EvalRow& a, const EvalRow& b) {
                         return std::tie(a.query_id, a.model_id) <
                                std::tie(b.query_id, b.model_id);
                       }));

  for (const auto& row : report.rows) {
    CAPTURE(row.query_id);
    CAPTURE(row.model_id);
    if (row.model_id == "model-a" || row.model_id == "model-b") {
      CHECK(row.scores.correctness == 1.0);
      CHECK(row.scores.completeness == 1.0);
      CHECK(row.scores.clarity >= 0.75);
    }
    if (row.model_id == "model-d") {
      CHECK(row.scores.correctness == 0.0);
      CHECK(row.diagnostics_summary == "no structured output");
    }
    if (row.model_id == "model-e") {
      CHECK(row.scores.correctness == 0.0);
      CHECK(row.scores.clarity == 0.0);
      CHECK(row.scores.completeness == 0.0);
      CHECK(row.diagnostics_summary.find("generation failed") == 0);
    }
  }

  SUBCASE("two consecutive runs render byte-identical reports") {
    auto again = run_eval(suite, backends, registry, "default");
    CHECK(render_csv(report) == render_csv(again));
    CHECK(render_markdown(report) == render_markdown(again));
  }
  SUBCASE("csv layout") {
    auto csv = render_csv(report);
    CHECK(csv.rfind("query_id,model_id,correctness,clarity,completeness\n",
                    0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 16);
  }
  SUBCASE("markdown table is aligned") {
    auto md = render_markdown(report);
    std::istringstream lines(md);
    std::string line;
    std::set<std::size_t> widths;
    while (std::getline(lines, line)) widths.insert(line.size());
    CHECK(widths.size() == 1);  // every row the same width
  }

  fs::remove_all(dir);
}
