#include "protoforge/pipeline.hpp"

#include <limits>
#include <sstream>

#include "protoforge/sexpr.hpp"

namespace protoforge::pipeline {

namespace {

struct AttemptOutcome {
  std::string text;
  std::optional<cpsa::CpsaUnit> unit;
  std::vector<Diagnostic> diagnostics;
  std::size_t error_count = std::numeric_limits<std::size_t>::max();
  bool structured = false;
};

// Analyzes one generation: extracts candidate blocks, keeps the best one
// (protocol-bearing first, then fewest errors, earliest wins ties).
AttemptOutcome analyze(const std::string& text) {
  AttemptOutcome outcome;
  outcome.text = text;
  bool best_has_protocol = false;
  for (const auto& candidate : eval::candidate_texts(text)) {
    outcome.structured = true;
    auto parsed = sexpr::parse(candidate);
    auto lowered = cpsa::lower(parsed.forms);
    std::vector<Diagnostic> diags = parsed.diagnostics;
    for (auto& d : lowered.diagnostics) diags.push_back(d);
    for (auto& d : cpsa::check_unit(lowered.unit)) diags.push_back(d);
    sort_diagnostics(diags);
    std::size_t errors = count_errors(diags);
    bool has_protocol = !lowered.unit.protocols.empty();
    bool better = !outcome.unit
                      ? true
                      : (has_protocol != best_has_protocol
                             ? has_protocol
                             : errors < outcome.error_count);
    if (better) {
      outcome.unit = std::move(lowered.unit);
      outcome.diagnostics = std::move(diags);
      outcome.error_count = errors;
      best_has_protocol = has_protocol;
    }
  }
  return outcome;
}

std::string feedback_section(const std::vector<Diagnostic>& diagnostics) {
  std::ostringstream out;
  out << "\n\nYour previous answer had the following problems. Fix them and "
         "answer again with a complete definition:\n";
  for (const auto& d : diagnostics)
    out << "- " << d.code << ": " << d.message << "\n";
  return out.str();
}

}  // namespace

TranslationResult translate(const std::string& query,
                            const PipelineConfig& config,
                            const context::TemplateRegistry& registry,
                            gateway::Backend& backend) {
  if (config.max_attempts < 1 || config.max_attempts > kMaxAttemptsCap)
    throw PipelineError("max_attempts must be between 1 and " +
                        std::to_string(kMaxAttemptsCap));

  TranslationResult result;
  auto base = context::build_context(query, config.template_id, registry);

  std::vector<AttemptOutcome> outcomes;
  std::string backend_failure;
  std::string context_text = base.text;

  for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
    if (!outcomes.empty() && !outcomes.back().diagnostics.empty())
      context_text = base.text + feedback_section(outcomes.back().diagnostics);

    gateway::GenerationRequest request;
    request.model_id = backend.id();
    request.temperature = 0.0;
    request.messages = {{gateway::ChatMessage::Role::User, context_text}};

    TranslationResult::Attempt record;
    record.request_digest = gateway::request_digest(request);
    record.error_count = std::numeric_limits<std::size_t>::max();

    std::string text;
    try {
      text = backend.generate(request).text;
    } catch (const gateway::GatewayError& e) {
      backend_failure = e.what();
      result.attempts.push_back(record);
      outcomes.push_back({});  // keeps attempt indices aligned
      continue;
    }

    AttemptOutcome outcome = analyze(text);
    if (outcome.structured) record.error_count = outcome.error_count;
    result.attempts.push_back(record);
    outcomes.push_back(std::move(outcome));
    if (outcomes.back().structured && outcomes.back().error_count == 0) break;
  }

  // Best attempt: fewest errors, earliest on ties.
  const AttemptOutcome* best = nullptr;
  for (const auto& o : outcomes)
    if (o.structured && (!best || o.error_count < best->error_count))
      best = &o;

  if (!best) {
    result.status = TranslationResult::Status::Failed;
    result.failure_reason = backend_failure.empty()
                                ? "NoStructuredOutput: no attempt produced "
                                  "an s-expression block"
                                : "BackendError: " + backend_failure;
    return result;
  }

  result.final_text = best->text;
  result.unit = best->unit;
  result.diagnostics = best->diagnostics;
  eval::ScoreCard card;
  card.correctness = eval::score_correctness(best->text);
  card.clarity = eval::score_clarity(best->text);
  card.completeness = 0.0;  // needs a gold checklist; not available here
  result.scorecard = card;
  result.status = best->error_count == 0
                      ? TranslationResult::Status::Clean
                      : TranslationResult::Status::WithFindings;
  return result;
}

}  // namespace protoforge::pipeline
