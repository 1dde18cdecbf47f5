#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rqa/promptgen.hpp"

namespace rqa {

struct ModelConfig {
  std::string name;
  std::string base_url;
  std::string api_key_env;
  bool supports_system_role = true;
  std::optional<double> temperature;
  std::optional<int> max_output_tokens;
  double request_timeout_s = 300.0;

  // Mock backend knobs; ignored by real endpoints.
  std::string mock_style = "plain";
  std::optional<double> mock_noise_sd;

  void validate() const;
};

enum class Strategy { zero, few };

std::string_view to_string(Strategy strategy);
Strategy strategy_from_string(std::string_view text);

struct TaskKey {
  std::string article_id;
  std::string model;
  Strategy strategy = Strategy::zero;
  int iteration = 1;

  auto operator<=>(const TaskKey&) const = default;
};

struct CompletionTask {
  TaskKey key;
  MessageSequence messages;
};

enum class RecordStatus { ok, failed };

struct RawRecord {
  TaskKey key;
  std::string text;
  double latency_ms = 0.0;
  RecordStatus status = RecordStatus::failed;
  int attempts = 0;
  int http_status = 0;
  std::string error;
};

std::string record_to_jsonl(const RawRecord& record);
RawRecord record_from_jsonl(const std::string& line);

/// Result of one HTTP exchange. Status 0 means the request never produced a
/// response (connection failure or timeout).
struct HttpReply {
  int status = 0;
  std::string body;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpReply post_json(const std::string& url, const std::string& body,
                              const std::map<std::string, std::string>& headers,
                              std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib client; http and https endpoints.
class HttplibTransport : public HttpTransport {
 public:
  HttpReply post_json(const std::string& url, const std::string& body,
                      const std::map<std::string, std::string>& headers,
                      std::chrono::milliseconds timeout) override;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
  /// Replaceable so tests do not wait out real backoff delays.
  std::function<void(std::chrono::milliseconds)> sleep;

  std::chrono::milliseconds delay_before(int attempt) const;
};

class CompletionError : public std::runtime_error {
 public:
  CompletionError(const std::string& what, int status, int attempts, bool retryable)
      : std::runtime_error(what), status_(status), attempts_(attempts), retryable_(retryable) {}
  int status() const { return status_; }
  int attempts() const { return attempts_; }
  bool retryable() const { return retryable_; }

 private:
  int status_;
  int attempts_;
  bool retryable_;
};

struct Completion {
  std::string text;
  int attempts = 0;
  /// Backends that do not touch the network report their own latency.
  std::optional<double> latency_ms;
};

/// OpenAI-compatible request body: {model, messages, temperature?, max_tokens?}.
std::string build_request_body(const ModelConfig& cfg, const MessageSequence& messages);

/// Assistant content of the first choice; throws CompletionError when absent.
std::string parse_response_content(const std::string& body);

/// POSTs to {base-url}/chat/completions. 429, 5xx and transport failures are
/// retried with exponential backoff; other 4xx fail immediately.
Completion complete(const ModelConfig& cfg, const MessageSequence& messages,
                    HttpTransport& transport, const RetryPolicy& retry = {});

/// Source of completions for the batch runner.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual Completion complete(const ModelConfig& cfg, const CompletionTask& task) = 0;
};

class HttpBackend : public ChatBackend {
 public:
  HttpBackend(HttpTransport& transport, RetryPolicy retry = {})
      : transport_(transport), retry_(std::move(retry)) {}
  Completion complete(const ModelConfig& cfg, const CompletionTask& task) override;

 private:
  HttpTransport& transport_;
  RetryPolicy retry_;
};

/// SHA-256 over (model, messages, temperature, iteration), hex encoded.
std::string cache_key(const CompletionTask& task, const ModelConfig& cfg);

/// One JSON file per key under {dir}/{model}/{key}.json.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  struct Entry {
    std::string text;
    int attempts = 1;
    double latency_ms = 0.0;
  };

  std::optional<Entry> load(const std::string& model, const std::string& key) const;
  void store(const std::string& model, const std::string& key, const Entry& entry) const;
  std::filesystem::path path_for(const std::string& model, const std::string& key) const;

 private:
  std::filesystem::path dir_;
};

struct BatchStats {
  std::size_t backend_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t deduplicated = 0;
  std::size_t max_in_flight = 0;
  std::size_t failed = 0;
};

/// Executes every task once, at most `concurrency` at a time. Records come
/// back in task order; a failed task yields a failed record and never stops
/// the batch. Tasks sharing a cache key run once and share the response.
std::vector<RawRecord> run_batch(const std::vector<CompletionTask>& tasks,
                                 const std::map<std::string, ModelConfig>& configs,
                                 std::size_t concurrency, const ResponseCache* cache,
                                 ChatBackend& backend, BatchStats* stats = nullptr);

}  // namespace rqa
