#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace protoforge::gateway {

struct ChatMessage {
  enum class Role { System, User, Assistant };
  Role role = Role::User;
  std::string content;
};

const char* role_name(ChatMessage::Role r);

struct GenerationRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;  // deterministic by default
  int max_output_tokens = 2048;
};

struct GenerationResult {
  std::string text;
  enum class FinishReason { Stop, Length, Error };
  FinishReason finish_reason = FinishReason::Stop;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  long latency_ms = 0;
};

class GatewayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NetworkError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};
class AuthError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};
class RateLimited : public GatewayError {
 public:
  using GatewayError::GatewayError;
};
class ReplayMiss : public GatewayError {
 public:
  using GatewayError::GatewayError;
};
class MalformedResponse : public GatewayError {
 public:
  using GatewayError::GatewayError;
};
class CassetteWriteError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

/// Stable content hash of (model_id, messages, temperature). The canonical
/// serialization length-prefixes every field, so it is unambiguous and
/// platform independent.
std::string request_digest(const GenerationRequest& request);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual GenerationResult generate(const GenerationRequest& request) = 0;
  virtual std::string id() const = 0;
};

using BackendHandle = std::shared_ptr<Backend>;

struct CassetteEntry {
  std::string hash;
  std::string model;
  double temperature = 0.0;
  std::string response_text;
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

/// JSON Lines cassette of recorded responses, keyed by request digest.
class Cassette {
 public:
  static Cassette load(const std::filesystem::path& path);
  static Cassette empty(const std::filesystem::path& path);

  /// Inserts or overwrites, then rewrites the backing file.
  void put(const CassetteEntry& entry);
  const CassetteEntry* find(const std::string& hash) const;
  std::size_t size() const { return entries_.size(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::vector<std::string> order_;  // insertion order of hashes
  std::map<std::string, CassetteEntry> entries_;
};

/// Deterministic backend replaying a cassette; misses fail loudly.
class ReplayBackend : public Backend {
 public:
  ReplayBackend(std::string id, Cassette cassette);
  GenerationResult generate(const GenerationRequest& request) override;
  std::string id() const override { return id_; }

 private:
  std::string id_;
  Cassette cassette_;
};

struct LiveConfig {
  std::string api_base;  // e.g. http://localhost:8089/v1
  std::string model_id;
  std::string api_key;       // from MODELFORGE_API_KEY
  int max_attempts = 3;      // retries on 429/5xx/transport errors
  long backoff_base_ms = 1000;
  int inflight_cap = 4;
};

/// Chat-completion HTTP backend: POST <api_base>/chat/completions with a
/// bearer token, reading the first choice's message content.
class LiveBackend : public Backend {
 public:
  explicit LiveBackend(std::string id, LiveConfig config);
  GenerationResult generate(const GenerationRequest& request) override;
  std::string id() const override { return id_; }

 private:
  std::string id_;
  LiveConfig config_;
  std::unique_ptr<std::mutex> slot_mutex_;
  int inflight_ = 0;
};

/// Performs a live call and stores the result in the cassette so a replay of
/// the same request reproduces it.
GenerationResult record(const GenerationRequest& request, Backend& live,
                        const std::filesystem::path& cassette_path);

}  // namespace protoforge::gateway
