#include "rqa/llm_gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "rqa/io.hpp"

namespace rqa {

using nlohmann::json;
namespace fs = std::filesystem;

void ModelConfig::validate() const {
  if (name.empty()) throw std::invalid_argument("model config has an empty name");
  if (!(request_timeout_s > 0.0))
    throw std::invalid_argument(fmt::format("model '{}': request timeout must be positive", name));
}

std::string_view to_string(Strategy strategy) {
  return strategy == Strategy::zero ? "zero" : "few";
}

Strategy strategy_from_string(std::string_view text) {
  if (text == "zero") return Strategy::zero;
  if (text == "few") return Strategy::few;
  throw std::invalid_argument(fmt::format("unknown strategy '{}'", text));
}

std::string record_to_jsonl(const RawRecord& r) {
  json j;
  j["article_id"] = r.key.article_id;
  j["model"] = r.key.model;
  j["strategy"] = to_string(r.key.strategy);
  j["iteration"] = r.key.iteration;
  j["status"] = r.status == RecordStatus::ok ? "ok" : "failed";
  j["attempts"] = r.attempts;
  j["latency_ms"] = r.latency_ms;
  j["http_status"] = r.http_status;
  j["error"] = r.error;
  j["text"] = r.text;
  return j.dump();
}

RawRecord record_from_jsonl(const std::string& line) {
  const json j = json::parse(line);
  RawRecord r;
  r.key.article_id = j.at("article_id").get<std::string>();
  r.key.model = j.at("model").get<std::string>();
  r.key.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  r.key.iteration = j.at("iteration").get<int>();
  r.status = j.at("status").get<std::string>() == "ok" ? RecordStatus::ok : RecordStatus::failed;
  r.attempts = j.value("attempts", 0);
  r.latency_ms = j.value("latency_ms", 0.0);
  r.http_status = j.value("http_status", 0);
  r.error = j.value("error", "");
  r.text = j.value("text", "");
  return r;
}

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw std::invalid_argument(fmt::format("URL '{}' has no scheme", url));
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string join_endpoint(const std::string& base_url) {
  std::string base = base_url;
  while (!base.empty() && base.back() == '/') base.pop_back();
  return base + "/chat/completions";
}

bool is_retryable(int status) { return status == 0 || status == 429 || status >= 500; }

std::string to_hex(const unsigned char* data, std::size_t n) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(digits[data[i] >> 4]);
    out.push_back(digits[data[i] & 0xf]);
  }
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  return to_hex(digest, len);
}

std::string safe_component(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_';
    if (!keep) c = '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

HttpReply HttplibTransport::post_json(const std::string& url, const std::string& body,
                                      const std::map<std::string, std::string>& headers,
                                      std::chrono::milliseconds timeout) {
  const ParsedUrl parts = split_url(url);
  httplib::Client client(parts.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);
  auto res = client.Post(parts.path, hdrs, body, "application/json");
  if (!res) return {0, httplib::to_string(res.error())};
  return {res->status, res->body};
}

std::chrono::milliseconds RetryPolicy::delay_before(int attempt) const {
  // attempt is the 1-based number of the attempt about to be made (>= 2).
  const double ms = static_cast<double>(base_delay.count()) * std::pow(factor, attempt - 2);
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

std::string build_request_body(const ModelConfig& cfg, const MessageSequence& messages) {
  json body;
  body["model"] = cfg.name;
  body["messages"] = json::array();
  for (const auto& m : messages)
    body["messages"].push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  if (cfg.temperature) body["temperature"] = *cfg.temperature;
  if (cfg.max_output_tokens) body["max_tokens"] = *cfg.max_output_tokens;
  return body.dump();
}

std::string parse_response_content(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    throw CompletionError("response body is not JSON", 200, 1, false);
  }
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty())
    throw CompletionError("response has no choices", 200, 1, false);
  const auto& message = (*choices)[0].value("message", json::object());
  const auto content = message.find("content");
  if (content == message.end() || !content->is_string() || content->get<std::string>().empty())
    throw CompletionError("first choice has no assistant content", 200, 1, false);
  return content->get<std::string>();
}

Completion complete(const ModelConfig& cfg, const MessageSequence& messages,
                    HttpTransport& transport, const RetryPolicy& retry) {
  cfg.validate();
  const std::string url = join_endpoint(cfg.base_url);
  const std::string body = build_request_body(cfg, messages);
  std::map<std::string, std::string> headers;
  if (!cfg.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key)
      headers["Authorization"] = std::string("Bearer ") + key;
  }
  const auto timeout =
      std::chrono::milliseconds(static_cast<long long>(cfg.request_timeout_s * 1000.0));

  HttpReply reply;
  for (int attempt = 1; attempt <= retry.max_attempts; ++attempt) {
    if (attempt > 1) {
      const auto delay = retry.delay_before(attempt);
      if (retry.sleep)
        retry.sleep(delay);
      else
        std::this_thread::sleep_for(delay);
    }
    reply = transport.post_json(url, body, headers, timeout);
    if (reply.status >= 200 && reply.status < 300) {
      try {
        return {parse_response_content(reply.body), attempt};
      } catch (const CompletionError& e) {
        throw CompletionError(e.what(), reply.status, attempt, false);
      }
    }
    if (!is_retryable(reply.status))
      throw CompletionError(fmt::format("model '{}': HTTP {}", cfg.name, reply.status),
                            reply.status, attempt, false);
  }
  throw CompletionError(fmt::format("model '{}': gave up after {} attempts (last status {})",
                                    cfg.name, retry.max_attempts, reply.status),
                        reply.status, retry.max_attempts, true);
}

Completion HttpBackend::complete(const ModelConfig& cfg, const CompletionTask& task) {
  return rqa::complete(cfg, task.messages, transport_, retry_);
}

std::string cache_key(const CompletionTask& task, const ModelConfig& cfg) {
  // Length-prefixed fields so no two distinct inputs share a serialization.
  std::string buf;
  auto put = [&buf](std::string_view field) {
    buf += std::to_string(field.size());
    buf.push_back(':');
    buf += field;
  };
  put("rqa-cache-v1");
  put(cfg.name);
  put(cfg.temperature ? fmt::format("{:.17g}", *cfg.temperature) : "default");
  put(std::to_string(task.key.iteration));
  for (const auto& m : task.messages) {
    put(to_string(m.role));
    put(m.content);
  }
  return sha256_hex(buf);
}

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {}

fs::path ResponseCache::path_for(const std::string& model, const std::string& key) const {
  return dir_ / safe_component(model) / (key + ".json");
}

std::optional<ResponseCache::Entry> ResponseCache::load(const std::string& model,
                                                        const std::string& key) const {
  const fs::path p = path_for(model, key);
  std::error_code ec;
  if (!fs::exists(p, ec)) return std::nullopt;
  try {
    const json j = json::parse(read_text_file(p));
    if (j.value("request_digest", "") != key) return std::nullopt;
    Entry e;
    e.text = j.at("response").get<std::string>();
    e.attempts = j.value("attempts", 1);
    e.latency_ms = j.value("latency_ms", 0.0);
    if (e.text.empty()) return std::nullopt;
    return e;
  } catch (const std::exception&) {
    // Unreadable entries are treated as misses and overwritten.
    return std::nullopt;
  }
}

void ResponseCache::store(const std::string& model, const std::string& key,
                          const Entry& entry) const {
  json j;
  j["request_digest"] = key;
  j["model"] = model;
  j["response"] = entry.text;
  j["attempts"] = entry.attempts;
  j["latency_ms"] = entry.latency_ms;
  j["stored_at"] = utc_timestamp();
  write_file_atomic(path_for(model, key), j.dump(2));
}

std::vector<RawRecord> run_batch(const std::vector<CompletionTask>& tasks,
                                 const std::map<std::string, ModelConfig>& configs,
                                 std::size_t concurrency, const ResponseCache* cache,
                                 ChatBackend& backend, BatchStats* stats) {
  if (concurrency < 1) throw std::invalid_argument("concurrency limit must be at least 1");

  std::vector<RawRecord> records(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) records[i].key = tasks[i].key;

  // Unique work items by cache key; duplicates copy the leader's record.
  std::vector<std::string> keys(tasks.size());
  std::vector<std::size_t> leaders;
  std::vector<std::size_t> leader_of(tasks.size());
  std::unordered_map<std::string, std::size_t> first;
  BatchStats local;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    auto cfg = configs.find(tasks[i].key.model);
    if (cfg == configs.end()) {
      records[i].status = RecordStatus::failed;
      records[i].error = fmt::format("no configuration for model '{}'", tasks[i].key.model);
      leader_of[i] = i;
      continue;
    }
    keys[i] = cache_key(tasks[i], cfg->second);
    auto [it, inserted] = first.emplace(keys[i], i);
    leader_of[i] = it->second;
    if (inserted)
      leaders.push_back(i);
    else
      ++local.deduplicated;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> in_flight{0};
  std::atomic<std::size_t> max_in_flight{0};
  std::atomic<std::size_t> calls{0};
  std::atomic<std::size_t> hits{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= leaders.size()) return;
      const std::size_t i = leaders[slot];
      const CompletionTask& task = tasks[i];
      const ModelConfig& cfg = configs.at(task.key.model);
      RawRecord& rec = records[i];

      if (cache) {
        if (auto entry = cache->load(cfg.name, keys[i])) {
          rec.status = RecordStatus::ok;
          rec.text = std::move(entry->text);
          rec.attempts = entry->attempts;
          rec.latency_ms = entry->latency_ms;
          rec.http_status = 200;
          hits.fetch_add(1);
          continue;
        }
      }

      const std::size_t now = in_flight.fetch_add(1) + 1;
      std::size_t seen = max_in_flight.load();
      while (now > seen && !max_in_flight.compare_exchange_weak(seen, now)) {
      }
      calls.fetch_add(1);
      const auto start = std::chrono::steady_clock::now();
      try {
        Completion c = backend.complete(cfg, task);
        rec.latency_ms = c.latency_ms.value_or(
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count());
        rec.attempts = c.attempts;
        rec.http_status = 200;
        if (c.text.empty()) {
          rec.status = RecordStatus::failed;
          rec.error = "empty completion";
        } else {
          rec.status = RecordStatus::ok;
          rec.text = std::move(c.text);
        }
      } catch (const CompletionError& e) {
        rec.status = RecordStatus::failed;
        rec.attempts = e.attempts();
        rec.http_status = e.status();
        rec.error = e.what();
      } catch (const std::exception& e) {
        rec.status = RecordStatus::failed;
        rec.attempts = 1;
        rec.error = e.what();
      }
      in_flight.fetch_sub(1);

      if (cache && rec.status == RecordStatus::ok) {
        try {
          cache->store(cfg.name, keys[i], {rec.text, rec.attempts, rec.latency_ms});
        } catch (const std::exception&) {
          // A cache write failure costs a rerun, not the record.
        }
      }
    }
  };

  const std::size_t n_threads = std::min(concurrency, leaders.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (leader_of[i] != i) {
      TaskKey key = records[i].key;
      records[i] = records[leader_of[i]];
      records[i].key = std::move(key);
    }
  }

  local.backend_calls = calls.load();
  local.cache_hits = hits.load();
  local.max_in_flight = max_in_flight.load();
  for (const auto& r : records)
    if (r.status == RecordStatus::failed) ++local.failed;
  if (stats) *stats = local;
  return records;
}

}  // namespace rqa
