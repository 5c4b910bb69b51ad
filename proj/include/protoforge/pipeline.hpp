#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "protoforge/context.hpp"
#include "protoforge/cpsa.hpp"
#include "protoforge/diagnostics.hpp"
#include "protoforge/eval.hpp"
#include "protoforge/gateway.hpp"

namespace protoforge::pipeline {

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxAttemptsCap = 10;

struct PipelineConfig {
  std::string template_id = "default";
  std::string backend_id;
  int max_attempts = 3;  // 1 disables the repair loop; hard cap 10
  bool fail_on_lint = false;
  std::optional<std::string> output_path;
};

struct TranslationResult {
  enum class Status { Clean, WithFindings, Failed };

  struct Attempt {
    std::string request_digest;
    std::size_t error_count = 0;  // SIZE_MAX when nothing usable came back
  };

  std::string final_text;
  std::optional<cpsa::CpsaUnit> unit;
  std::vector<Diagnostic> diagnostics;
  std::vector<Attempt> attempts;
  std::optional<eval::ScoreCard> scorecard;
  Status status = Status::Failed;
  std::string failure_reason;  // set when status == Failed
};

/// Query -> context -> generation -> extraction -> validation, with a bounded
/// repair loop: each retry appends the previous attempt's diagnostics to the
/// context. Returns the best attempt (fewest errors, earliest wins ties).
/// Failures are recorded in the result, never thrown.
TranslationResult translate(const std::string& query,
                            const PipelineConfig& config,
                            const context::TemplateRegistry& registry,
                            gateway::Backend& backend);

}  // namespace protoforge::pipeline
