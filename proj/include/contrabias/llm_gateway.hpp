#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "contrabias/corpus.hpp"

namespace contrabias {

struct GenerationConfig {
  double top_p = 0.9;
  double temperature = 0.8;
  int n_queries_per_item = 5;
  int max_retries_per_query = 5;

  void validate() const;
};

enum class CompletionStatus { kParsed, kRetryExhausted };

struct CompletionRecord {
  std::string item_id;
  int query_index = 0;
  // 1-based attempt that produced this record; equals the retry budget when
  // the query was exhausted.
  int attempt_index = 0;
  std::string raw_response;
  std::optional<std::string> predicted_sentence;
  CompletionStatus status = CompletionStatus::kRetryExhausted;
};

struct ModelEndpoint {
  std::string base_url;  // e.g. http://localhost:8000/v1
  std::string model_id;
  // Name of the environment variable holding the bearer token.
  std::string token_env = "CONTRABIAS_API_KEY";
  double timeout_seconds = 60.0;
  int max_in_flight = 4;
  int transport_retries = 3;

  void validate() const;

  // CONTRABIAS_BASE_URL, CONTRABIAS_MODEL, CONTRABIAS_TIMEOUT,
  // CONTRABIAS_MAX_IN_FLIGHT; the token itself is read from token_env at
  // request time.
  static ModelEndpoint from_env();
};

struct ChatRequest {
  std::string item_id;
  int query_index = 0;
  int attempt = 1;
  std::string prompt;
  GenerationConfig generation;
};

// Returns the assistant message text. Implementations must be safe to call
// from several threads. Throws EndpointUnreachable or AuthFailure.
class ChatEndpoint {
 public:
  virtual ~ChatEndpoint() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

// OpenAI-compatible chat completions over HTTP(S).
class OpenAiChatEndpoint final : public ChatEndpoint {
 public:
  explicit OpenAiChatEndpoint(ModelEndpoint endpoint);
  std::string complete(const ChatRequest& request) override;

  static nlohmann::json request_body(const std::string& model_id, const ChatRequest& request);

 private:
  ModelEndpoint endpoint_;
  std::string origin_;
  std::string path_prefix_;
};

// Test double driven by a callback.
class ScriptedEndpoint final : public ChatEndpoint {
 public:
  using Script = std::function<std::string(const ChatRequest&)>;
  explicit ScriptedEndpoint(Script script);
  std::string complete(const ChatRequest& request) override;
  long calls() const { return calls_.load(); }

 private:
  Script script_;
  std::atomic<long> calls_{0};
};

// Replays a journal written by JournalingEndpoint, keyed by
// (item_id, query_index, attempt).
class CassetteEndpoint final : public ChatEndpoint {
 public:
  explicit CassetteEndpoint(const std::filesystem::path& journal);
  std::string complete(const ChatRequest& request) override;
  std::size_t size() const { return responses_.size(); }

 private:
  std::map<std::tuple<std::string, int, int>, std::string> responses_;
};

// Forwards to an inner endpoint and appends every exchange to a JSONL file.
class JournalingEndpoint final : public ChatEndpoint {
 public:
  JournalingEndpoint(std::shared_ptr<ChatEndpoint> inner, const std::filesystem::path& journal);
  std::string complete(const ChatRequest& request) override;

 private:
  std::shared_ptr<ChatEndpoint> inner_;
  std::mutex mu_;
  std::ofstream out_;
};

std::string_view unmasking_template();

// Fills {input_sentence} and {bias_type} in a single pass; substituted text
// is never re-scanned.
std::string render_prompt(const EvalItem& item);

struct ParseOptions {
  bool allow_code_fence = true;
};

struct ParseOutcome {
  std::optional<std::string> predicted_sentence;
  std::string failure_reason;
  bool ok() const { return predicted_sentence.has_value(); }
};

ParseOutcome parse_completion(std::string_view raw, const ParseOptions& options = {});

std::vector<CompletionRecord> unmask(ChatEndpoint& endpoint, const EvalItem& item,
                                     const GenerationConfig& config,
                                     const ParseOptions& options = {});

// Bounded-parallel unmask over many items; result[i] belongs to items[i].
std::vector<std::vector<CompletionRecord>> unmask_all(ChatEndpoint& endpoint,
                                                      std::span<const EvalItem> items,
                                                      const GenerationConfig& config,
                                                      int max_in_flight,
                                                      const ParseOptions& options = {});

nlohmann::json to_json(const CompletionRecord& record);

}  // namespace contrabias
