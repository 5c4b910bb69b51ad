#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "protoforge/context.hpp"
#include "protoforge/cpsa.hpp"
#include "protoforge/gateway.hpp"

namespace protoforge::eval {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operationalized "main aspects" of a query: the facts a correct definition
/// must exhibit.
struct GoldChecklist {
  std::string query_id;
  int expected_role_count = 1;
  std::set<std::string> expected_variables;
  std::map<int, int> expected_event_counts;  // role index -> trace length
  std::set<cpsa::Term::Kind> required_operators;
};

struct ScoreCard {
  double correctness = 0.0;
  double clarity = 0.0;
  double completeness = 0.0;
};

struct EvalRow {
  std::string query_id;
  std::string model_id;
  ScoreCard scores;
  std::string diagnostics_summary;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // sorted by (query_id, model_id)
  std::string generated_at;   // ISO 8601; excluded from rendered reports
  std::string config_digest;
};

/// 0 when no block lowers to a protocol; otherwise 1/(1+E) where E is the
/// Error-severity diagnostic count of the best block.
double score_correctness(const std::string& output_text);

/// Mean of four binary readability checks: herald present, alphabetic
/// protocol/role names, >= 0.8 similarity to the canonical formatting, and
/// no line over 100 characters. 0 when nothing parses.
double score_clarity(const std::string& output_text);

/// Checklist coverage fraction; 0 when nothing lowers to a protocol.
double score_completeness(const std::string& output_text,
                          const GoldChecklist& gold);

/// 1 - normalized Levenshtein distance, in [0,1].
double text_similarity(const std::string& a, const std::string& b);

/// Candidate definition texts inside a model response: every extracted
/// block, preceded by the concatenation of all raw-scan blocks so that a
/// protocol and its skeletons are analyzed as one unit.
std::vector<std::string> candidate_texts(const std::string& output_text);

struct EvalQuery {
  std::string query_id;
  std::string query_text;
  GoldChecklist checklist;
};

/// JSON suite file: array of {query_id, query_text, checklist}.
std::vector<EvalQuery> load_suite(const std::filesystem::path& path);

/// Scores every (query, backend) cell. Backend failures yield a zero
/// scorecard with the error recorded; the run continues.
EvalReport run_eval(const std::vector<EvalQuery>& suite,
                    const std::vector<gateway::BackendHandle>& backends,
                    const context::TemplateRegistry& registry,
                    const std::string& template_id);

/// Deterministic renderings (the timestamp is deliberately omitted so two
/// identical runs produce identical bytes).
std::string render_csv(const EvalReport& report);
std::string render_markdown(const EvalReport& report);

}  // namespace protoforge::eval
