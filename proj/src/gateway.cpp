#include "protoforge/gateway.hpp"

#include <chrono>
#include <condition_variable>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "protoforge/context.hpp"

namespace protoforge::gateway {

using nlohmann::json;

const char* role_name(ChatMessage::Role r) {
  switch (r) {
    case ChatMessage::Role::System: return "system";
    case ChatMessage::Role::User: return "user";
    case ChatMessage::Role::Assistant: return "assistant";
  }
  return "user";
}

std::string request_digest(const GenerationRequest& request) {
  // Canonical serialization: every field length-prefixed, temperature
  // rendered with fixed precision. Unit separator bytes guard against
  // concatenation ambiguity.
  std::ostringstream canon;
  char temp[32];
  std::snprintf(temp, sizeof temp, "%.6f", request.temperature);
  canon << request.model_id.size() << ':' << request.model_id << '\x1f'
        << temp << '\x1f' << request.messages.size() << '\x1f';
  for (const ChatMessage& m : request.messages)
    canon << role_name(m.role) << ':' << m.content.size() << ':' << m.content
          << '\x1e';
  return context::content_digest(canon.str());
}

// ---------------------------------------------------------------------------
// Cassette
// ---------------------------------------------------------------------------

Cassette Cassette::load(const std::filesystem::path& path) {
  Cassette c;
  c.path_ = path;
  std::ifstream in(path);
  if (!in)
    throw CassetteWriteError("cannot open cassette " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw MalformedResponse("cassette line is not valid JSON in " +
                              path.string());
    CassetteEntry e;
    e.hash = j.value("hash", "");
    e.model = j.value("model", "");
    e.temperature = j.value("temperature", 0.0);
    e.response_text = j.value("response_text", "");
    if (j.contains("usage")) {
      e.prompt_tokens = j["usage"].value("prompt_tokens", 0);
      e.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
    if (!c.entries_.count(e.hash)) c.order_.push_back(e.hash);
    c.entries_[e.hash] = std::move(e);
  }
  return c;
}

Cassette Cassette::empty(const std::filesystem::path& path) {
  Cassette c;
  c.path_ = path;
  return c;
}

void Cassette::put(const CassetteEntry& entry) {
  if (!entries_.count(entry.hash)) order_.push_back(entry.hash);
  entries_[entry.hash] = entry;

  std::ofstream out(path_, std::ios::binary | std::ios::trunc);
  if (!out)
    throw CassetteWriteError("cannot write cassette " + path_.string());
  for (const std::string& hash : order_) {
    const CassetteEntry& e = entries_.at(hash);
    json j = {{"hash", e.hash},
              {"model", e.model},
              {"temperature", e.temperature},
              {"response_text", e.response_text},
              {"usage",
               {{"prompt_tokens", e.prompt_tokens},
                {"completion_tokens", e.completion_tokens}}}};
    out << j.dump() << "\n";
  }
}

const CassetteEntry* Cassette::find(const std::string& hash) const {
  auto it = entries_.find(hash);
  return it == entries_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// Replay backend
// ---------------------------------------------------------------------------

ReplayBackend::ReplayBackend(std::string id, Cassette cassette)
    : id_(std::move(id)), cassette_(std::move(cassette)) {}

GenerationResult ReplayBackend::generate(const GenerationRequest& request) {
  std::string hash = request_digest(request);
  const CassetteEntry* entry = cassette_.find(hash);
  if (!entry)
    throw ReplayMiss("no cassette entry for request " + hash + " (model " +
                     request.model_id + ") in " +
                     cassette_.path().string());
  GenerationResult result;
  result.text = entry->response_text;
  result.finish_reason = GenerationResult::FinishReason::Stop;
  result.prompt_tokens = entry->prompt_tokens;
  result.completion_tokens = entry->completion_tokens;
  result.latency_ms = 0;
  return result;
}

// ---------------------------------------------------------------------------
// Live backend
// ---------------------------------------------------------------------------

namespace {

struct ParsedBase {
  std::string host_port;  // scheme://host:port
  std::string path_prefix;
};

ParsedBase parse_api_base(const std::string& api_base) {
  auto scheme_end = api_base.find("://");
  std::size_t path_start = api_base.find(
      '/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) return {api_base, ""};
  std::string prefix = api_base.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {api_base.substr(0, path_start), prefix};
}

}  // namespace

LiveBackend::LiveBackend(std::string id, LiveConfig config)
    : id_(std::move(id)),
      config_(std::move(config)),
      slot_mutex_(std::make_unique<std::mutex>()) {}

GenerationResult LiveBackend::generate(const GenerationRequest& request) {
  // Bounded in-flight requests.
  static std::condition_variable slot_cv;
  std::unique_lock<std::mutex> slot(*slot_mutex_);
  slot_cv.wait(slot, [&] { return inflight_ < config_.inflight_cap; });
  ++inflight_;
  slot.unlock();
  struct SlotGuard {
    LiveBackend* self;
    std::condition_variable* cv;
    ~SlotGuard() {
      std::lock_guard<std::mutex> lock(*self->slot_mutex_);
      --self->inflight_;
      cv->notify_one();
    }
  } guard{this, &slot_cv};

  json body;
  body["model"] = request.model_id;
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_output_tokens;
  body["messages"] = json::array();
  for (const ChatMessage& m : request.messages)
    body["messages"].push_back(
        {{"role", role_name(m.role)}, {"content", m.content}});

  ParsedBase base = parse_api_base(config_.api_base);
  std::string path = base.path_prefix + "/chat/completions";

  std::string last_transport_error;
  int last_status = 0;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) {
      long delay = config_.backoff_base_ms << (attempt - 2);
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }

    httplib::Client client(base.host_port);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    httplib::Headers headers;
    if (!config_.api_key.empty())
      headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto start = std::chrono::steady_clock::now();
    auto res = client.Post(path, headers, body.dump(), "application/json");
    auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - start)
                       .count();

    if (!res) {
      last_transport_error = httplib::to_string(res.error());
      continue;  // transport error: retry
    }
    last_status = res->status;
    if (res->status == 401 || res->status == 403)
      throw AuthError("authentication rejected by " + config_.api_base +
                      " (HTTP " + std::to_string(res->status) + ")");
    if (res->status == 429 || res->status >= 500) continue;  // retry
    if (res->status != 200)
      throw NetworkError("unexpected HTTP " + std::to_string(res->status) +
                         " from " + config_.api_base);

    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") ||
        reply["choices"].empty())
      throw MalformedResponse("response is not a chat completion object");
    const json& choice = reply["choices"][0];
    GenerationResult result;
    try {
      result.text = choice.at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      throw MalformedResponse("chat completion choice has no message content");
    }
    std::string finish = choice.value("finish_reason", "stop");
    result.finish_reason = finish == "length"
                               ? GenerationResult::FinishReason::Length
                               : GenerationResult::FinishReason::Stop;
    if (reply.contains("usage")) {
      result.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
      result.completion_tokens = reply["usage"].value("completion_tokens", 0);
    }
    result.latency_ms = latency;
    return result;
  }

  if (last_status == 429)
    throw RateLimited("rate limited after " +
                      std::to_string(config_.max_attempts) + " attempts");
  throw NetworkError(
      "request failed after " + std::to_string(config_.max_attempts) +
      " attempts" +
      (last_status ? " (last HTTP " + std::to_string(last_status) + ")"
                   : " (" + last_transport_error + ")"));
}

// ---------------------------------------------------------------------------
// Record
// ---------------------------------------------------------------------------

namespace {
std::mutex g_record_mutex;  // cassette writes are serialized
}

GenerationResult record(const GenerationRequest& request, Backend& live,
                        const std::filesystem::path& cassette_path) {
  GenerationResult result = live.generate(request);

  std::lock_guard<std::mutex> lock(g_record_mutex);
  Cassette cassette = std::filesystem::exists(cassette_path)
                          ? Cassette::load(cassette_path)
                          : Cassette::empty(cassette_path);
  CassetteEntry entry;
  entry.hash = request_digest(request);
  entry.model = request.model_id;
  entry.temperature = request.temperature;
  entry.response_text = result.text;
  entry.prompt_tokens = result.prompt_tokens;
  entry.completion_tokens = result.completion_tokens;
  cassette.put(entry);
  return result;
}

}  // namespace protoforge::gateway
