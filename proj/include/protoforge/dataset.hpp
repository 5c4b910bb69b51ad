#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "protoforge/gateway.hpp"

namespace protoforge::dataset {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class AllCandidatesRejected : public DatasetError {
 public:
  using DatasetError::DatasetError;
};
class DegenerateSplit : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

struct SeedTemplate {
  std::string seed_id;
  std::string cpsa_text;  // lowers with zero error diagnostics
  std::string topic;
};

/// Reads `seeds.json` plus the definition files it names, validating each.
std::vector<SeedTemplate> load_seeds(const std::filesystem::path& directory);

enum class Split { Train, Test };

struct QAPair {
  std::string pair_id;
  std::string question;  // natural-language specification
  std::string answer;    // CPSA definition text
  std::string seed_id;
  enum class Generation { Seed, BackTranslated, Variance };
  Generation generation = Generation::BackTranslated;
  std::string parent_id;  // set for variance pairs
  std::optional<Split> split;
};

/// The request synthesize_pairs issues for one back-translation candidate.
/// Exposed so cassettes can be prepared offline.
gateway::GenerationRequest synthesis_request(const SeedTemplate& seed,
                                             int index,
                                             const std::string& model_id);

/// Back-translates each seed into `per_seed` natural-language specs. Empty
/// or near-duplicate questions are dropped; a seed whose every candidate is
/// dropped raises AllCandidatesRejected.
std::vector<QAPair> synthesize_pairs(const std::vector<SeedTemplate>& seeds,
                                     gateway::Backend& backend, int per_seed,
                                     const std::string& model_id);

/// Adds up to k variants per pair through consistent identifier renaming
/// applied to both question and answer (and, when a backend is given, a
/// paraphrase of the question). Variants whose answer no longer lowers
/// cleanly are rejected. Output is originals followed by accepted variants.
std::vector<QAPair> augment_variance(const std::vector<QAPair>& pairs,
                                     gateway::Backend* backend, int k,
                                     const std::string& model_id = "");

/// Deterministic group-wise split: variants of one seed stay together.
std::pair<std::vector<QAPair>, std::vector<QAPair>> split_pairs(
    std::vector<QAPair> pairs, double train_fraction, std::uint64_t rng_seed);

struct ExportReport {
  std::size_t pair_count = 0;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  std::size_t estimated_tokens = 0;
  int epochs = 0;
  std::size_t estimated_training_tokens = 0;
};

/// Byte-based token estimate: ceil(bytes/4) + 4 per message. Documented
/// accuracy is +/-20% against provider tokenizers.
std::size_t estimate_message_tokens(std::string_view content);

/// Writes chat-format JSON Lines: {"messages":[system?, user, assistant]}.
/// An empty system prompt omits the system message.
ExportReport export_jsonl(const std::vector<QAPair>& pairs,
                          const std::string& system_prompt,
                          const std::filesystem::path& out, int epochs);

/// Corpus directory: one pair-<id>.json per pair plus manifest.json.
void save_corpus(const std::vector<QAPair>& pairs,
                 const std::filesystem::path& directory);
std::vector<QAPair> load_corpus(const std::filesystem::path& directory);

/// Whitespace/punctuation/case-insensitive question key for duplicate
/// detection.
std::string normalized_question_key(std::string_view question);

/// Writes a deterministic cassette answering every synthesis request for the
/// given seeds with a generated reference specification, so the forge runs
/// without any live backend.
void write_reference_cassette(const std::vector<SeedTemplate>& seeds,
                              int per_seed, const std::string& model_id,
                              const std::filesystem::path& path);

}  // namespace protoforge::dataset
