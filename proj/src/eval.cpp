#include "protoforge/eval.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include "json.hpp"

#include "protoforge/sexpr.hpp"

namespace protoforge::eval {

using nlohmann::json;

namespace {

struct BlockAnalysis {
  cpsa::CpsaUnit unit;
  std::size_t error_count = 0;
};

}  // namespace

std::vector<std::string> candidate_texts(const std::string& output_text) {
  auto blocks = sexpr::extract_blocks(output_text);
  std::vector<std::string> candidates;
  if (blocks.size() > 1 &&
      blocks.front().origin == sexpr::ExtractedBlock::Origin::RawScan) {
    std::string merged;
    for (const auto& block : blocks) {
      merged += block.text;
      merged += '\n';
    }
    candidates.push_back(std::move(merged));
  }
  for (auto& block : blocks) candidates.push_back(std::move(block.text));
  return candidates;
}

namespace {

// Lowers every candidate text and keeps the one holding a protocol with the
// fewest Error diagnostics (earliest wins ties).
std::optional<BlockAnalysis> best_block(const std::string& text) {
  std::optional<BlockAnalysis> best;
  for (const auto& candidate : candidate_texts(text)) {
    auto parsed = sexpr::parse(candidate);
    auto lowered = cpsa::lower(parsed.forms);
    if (lowered.unit.protocols.empty()) continue;
    std::size_t errors = count_errors(parsed.diagnostics) +
                         count_errors(lowered.diagnostics) +
                         count_errors(cpsa::check_unit(lowered.unit));
    if (!best || errors < best->error_count)
      best = BlockAnalysis{std::move(lowered.unit), errors};
  }
  return best;
}

}  // namespace

double score_correctness(const std::string& output_text) {
  auto block = best_block(output_text);
  if (!block) return 0.0;
  return 1.0 / (1.0 + static_cast<double>(block->error_count));
}

double text_similarity(const std::string& a, const std::string& b) {
  if (a == b) return 1.0;
  std::size_t la = a.size(), lb = b.size();
  std::size_t longest = std::max(la, lb);
  if (longest == 0) return 1.0;
  // Cheap bound for pathological sizes: the distance is at least the length
  // difference, which already decides the 0.8 threshold.
  if (la * lb > std::size_t{25'000'000})
    return 1.0 - static_cast<double>(la > lb ? la - lb : lb - la) /
                     static_cast<double>(longest);

  std::vector<std::size_t> prev(lb + 1), cur(lb + 1);
  for (std::size_t j = 0; j <= lb; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= la; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= lb; ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return 1.0 - static_cast<double>(prev[lb]) / static_cast<double>(longest);
}

double score_clarity(const std::string& output_text) {
  auto parsed = sexpr::parse(output_text);
  if (parsed.forms.empty()) return 0.0;
  auto lowered = cpsa::lower(parsed.forms);
  const auto& unit = lowered.unit;

  bool has_herald = false;
  for (const auto& p : unit.protocols)
    if (p.herald) has_herald = true;
  for (const auto& form : unit.raw_forms)
    if (form.head() == "herald") has_herald = true;

  auto alpha_leading = [](const std::string& name) {
    return !name.empty() && std::isalpha(static_cast<unsigned char>(name[0]));
  };
  bool names_ok = true;
  for (const auto& p : unit.protocols) {
    names_ok = names_ok && alpha_leading(p.name);
    for (const auto& r : p.roles) names_ok = names_ok && alpha_leading(r.name);
  }

  bool canonical = text_similarity(output_text, cpsa::format_unit(unit)) >= 0.8;

  bool short_lines = true;
  std::size_t line_len = 0;
  for (char c : output_text) {
    if (c == '\n')
      line_len = 0;
    else if (++line_len > 100)
      short_lines = false;
  }

  return (has_herald + names_ok + canonical + short_lines) / 4.0;
}

double score_completeness(const std::string& output_text,
                          const GoldChecklist& gold) {
  auto block = best_block(output_text);
  std::size_t total = 1 + gold.expected_variables.size() +
                      gold.expected_event_counts.size() +
                      gold.required_operators.size();
  if (!block) return 0.0;
  const auto& unit = block->unit;

  std::size_t hits = 0;
  const cpsa::Protocol& first = unit.protocols.front();
  if (static_cast<int>(first.roles.size()) == gold.expected_role_count)
    ++hits;

  std::set<std::string> declared;
  std::set<cpsa::Term::Kind> operators;
  std::function<void(const cpsa::Term&)> visit = [&](const cpsa::Term& t) {
    if (t.kind != cpsa::Term::Kind::Var && t.kind != cpsa::Term::Kind::Tag)
      operators.insert(t.kind);
    for (const auto& a : t.args) visit(a);
  };
  for (const auto& p : unit.protocols)
    for (const auto& r : p.roles) {
      for (const auto& [id, sort] : r.vars) declared.insert(id);
      for (const auto& e : r.trace) visit(e.message);
    }
  for (const auto& s : unit.skeletons)
    for (const auto& [id, sort] : s.vars) declared.insert(id);

  for (const auto& var : gold.expected_variables)
    if (declared.count(var)) ++hits;
  for (const auto& [role_index, count] : gold.expected_event_counts)
    if (role_index >= 0 &&
        role_index < static_cast<int>(first.roles.size()) &&
        static_cast<int>(first.roles[role_index].trace.size()) == count)
      ++hits;
  for (const auto& op : gold.required_operators)
    if (operators.count(op)) ++hits;

  return static_cast<double>(hits) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Suite and report
// ---------------------------------------------------------------------------

std::vector<EvalQuery> load_suite(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EvalError("cannot open suite " + path.string());
  json suite = json::parse(in, nullptr, false);
  if (suite.is_discarded() || !suite.is_array())
    throw EvalError("suite file is not a JSON array: " + path.string());

  std::vector<EvalQuery> queries;
  for (const auto& entry : suite) {
    EvalQuery q;
    q.query_id = entry.at("query_id").get<std::string>();
    q.query_text = entry.at("query_text").get<std::string>();
    const json& checklist = entry.at("checklist");
    q.checklist.query_id = q.query_id;
    q.checklist.expected_role_count = checklist.at("role_count").get<int>();
    if (q.checklist.expected_role_count < 1)
      throw EvalError("checklist for " + q.query_id +
                      " has role_count < 1");
    for (const auto& var : checklist.at("variables"))
      q.checklist.expected_variables.insert(var.get<std::string>());
    for (const auto& [key, value] : checklist.at("event_counts").items()) {
      int index = std::stoi(key);
      if (index < 0 || index >= q.checklist.expected_role_count)
        throw EvalError("checklist for " + q.query_id +
                        " indexes a role beyond role_count");
      q.checklist.expected_event_counts[index] = value.get<int>();
    }
    for (const auto& op : checklist.at("operators")) {
      auto kind = cpsa::term_kind_from_name(op.get<std::string>());
      if (!kind)
        throw EvalError("unknown operator `" + op.get<std::string>() +
                        "` in checklist for " + q.query_id);
      q.checklist.required_operators.insert(*kind);
    }
    queries.push_back(std::move(q));
  }
  if (queries.empty()) throw EvalError("suite is empty");
  return queries;
}

namespace {

std::string diagnostics_summary_for(const std::string& text) {
  auto block = best_block(text);
  if (!block) return "no structured output";
  std::size_t warnings = 0, lints = 0;
  auto all = cpsa::check_unit(block->unit);
  for (const auto& d : all) {
    if (d.severity == Severity::Warning) ++warnings;
    if (d.severity == Severity::Lint) ++lints;
  }
  std::ostringstream out;
  out << "E=" << block->error_count << " W=" << warnings << " L=" << lints;
  return out.str();
}

std::string now_iso8601() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&t));
  return buf;
}

std::string two_decimals(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

EvalReport run_eval(const std::vector<EvalQuery>& suite,
                    const std::vector<gateway::BackendHandle>& backends,
                    const context::TemplateRegistry& registry,
                    const std::string& template_id) {
  if (suite.empty()) throw EvalError("evaluation suite is empty");
  if (backends.empty()) throw EvalError("no backends to evaluate");

  EvalReport report;
  std::ostringstream config;
  config << template_id;
  for (const auto& b : backends) config << '\x1f' << b->id();
  for (const auto& q : suite) config << '\x1e' << q.query_id;
  report.config_digest = context::content_digest(config.str());
  report.generated_at = now_iso8601();

  for (const auto& query : suite) {
    auto ctx = context::build_context(query.query_text, template_id, registry);
    for (const auto& backend : backends) {
      EvalRow row;
      row.query_id = query.query_id;
      row.model_id = backend->id();

      gateway::GenerationRequest request;
      request.model_id = backend->id();
      request.temperature = 0.0;
      request.messages = {{gateway::ChatMessage::Role::User, ctx.text}};
      try {
        auto result = backend->generate(request);
        row.scores.correctness = score_correctness(result.text);
        row.scores.clarity = score_clarity(result.text);
        row.scores.completeness =
            score_completeness(result.text, query.checklist);
        row.diagnostics_summary = diagnostics_summary_for(result.text);
      } catch (const std::exception& e) {
        row.scores = {};  // all zeros
        row.diagnostics_summary = std::string("generation failed: ") +
                                  e.what();
      }
      report.rows.push_back(std::move(row));
    }
  }

  std::sort(report.rows.begin(), report.rows.end(),
            [](const EvalRow& a, const EvalRow& b) {
              return std::tie(a.query_id, a.model_id) <
                     std::tie(b.query_id, b.model_id);
            });
  return report;
}

std::string render_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "query_id,model_id,correctness,clarity,completeness\n";
  for (const auto& row : report.rows)
    out << row.query_id << ',' << row.model_id << ','
        << two_decimals(row.scores.correctness) << ','
        << two_decimals(row.scores.clarity) << ','
        << two_decimals(row.scores.completeness) << '\n';
  return out.str();
}

std::string render_markdown(const EvalReport& report) {
  std::size_t qw = std::string("query").size();
  std::size_t mw = std::string("model").size();
  for (const auto& row : report.rows) {
    qw = std::max(qw, row.query_id.size());
    mw = std::max(mw, row.model_id.size());
  }
  auto pad = [](const std::string& s, std::size_t width) {
    return s + std::string(width - s.size(), ' ');
  };
  std::ostringstream out;
  out << "| " << pad("query", qw) << " | " << pad("model", mw)
      << " | correctness | clarity | completeness |\n";
  out << "| " << std::string(qw, '-') << " | " << std::string(mw, '-')
      << " | ----------- | ------- | ------------ |\n";
  for (const auto& row : report.rows)
    out << "| " << pad(row.query_id, qw) << " | " << pad(row.model_id, mw)
        << " | " << pad(two_decimals(row.scores.correctness), 11) << " | "
        << pad(two_decimals(row.scores.clarity), 7) << " | "
        << pad(two_decimals(row.scores.completeness), 12) << " |\n";
  return out.str();
}

}  // namespace protoforge::eval
