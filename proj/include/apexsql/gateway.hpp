#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "apexsql/util.hpp"
#include "json.hpp"

namespace apexsql {

enum class Role { kSystem, kUser, kAssistant };

struct ChatMessage {
  Role role = Role::kUser;
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  long max_output_tokens = 4096;
  // Free-text label identifying the template slot ("sl_plan",
  // "sql_agent_step", ...); drives the ledger and replay matching.
  std::string tag;

  std::string concatenated_content() const;
};

struct ChatResponse {
  std::string content;
  long input_tokens = 0;
  long output_tokens = 0;
  std::string backend_id;
  bool truncated = false;  // backend hit max_output_tokens; surfaced, not hidden
};

class GatewayError : public std::runtime_error {
 public:
  enum class Kind { kBackendUnavailable, kScriptExhausted };
  GatewayError(Kind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct TagUsage {
  long calls = 0;
  long input_tokens = 0;
  long output_tokens = 0;
};

class TokenLedger {
 public:
  void add(const std::string& tag, long input, long output);
  TagUsage usage(const std::string& tag) const;
  long total_tokens() const;
  nlohmann::json to_json() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, TagUsage> per_tag_;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string id() const = 0;
  virtual bool deterministic() const { return false; }
};

// Scripted responses for deterministic testing. Each entry is consumed at
// most once; matching takes the first unused entry whose tag equals the
// request tag and whose `match` substring (if any) appears in the request
// content. Matching is serialized so concurrent callers each consume a
// distinct entry.
class ReplayBackend : public Backend {
 public:
  struct Entry {
    std::string tag;
    std::string match;
    std::string response;
  };

  explicit ReplayBackend(std::vector<Entry> entries,
                         TokenEstimator estimator = default_estimator());
  static std::shared_ptr<ReplayBackend> from_json_text(const std::string& text);
  static std::shared_ptr<ReplayBackend> from_file(const std::string& path);

  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override { return "replay"; }
  bool deterministic() const override { return true; }

  size_t consumed() const;
  size_t size() const { return entries_.size(); }
  // True when a matching unused entry exists for this request.
  bool has_match(const ChatRequest& request) const;
  void reset();

 private:
  mutable std::mutex mutex_;
  std::vector<Entry> entries_;
  std::vector<bool> used_;
  size_t consumed_ = 0;
  TokenEstimator estimator_;
};

// Live chat-completions endpoint. Configuration comes from explicit values
// or the APEX_BASE_URL / APEX_API_KEY / APEX_MODEL environment variables.
class HttpBackend : public Backend {
 public:
  HttpBackend(std::string base_url, std::string api_key, std::string model,
              int max_attempts = 3, double initial_backoff_seconds = 1.0);
  static std::shared_ptr<HttpBackend> from_env();

  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override { return "http:" + model_; }

 private:
  std::string base_url_;
  std::string api_key_;
  std::string model_;
  int max_attempts_;
  double initial_backoff_seconds_;
};

// Canned-rule mock: inspects the request tag and returns a minimal
// well-formed response. Useful for offline demos of the full pipeline.
class CannedBackend : public Backend {
 public:
  explicit CannedBackend(TokenEstimator estimator = default_estimator());
  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override { return "canned"; }
  bool deterministic() const override { return true; }

 private:
  TokenEstimator estimator_;
};

struct TraceRecord {
  uint64_t major = 0;
  uint32_t slot = 0;
  uint32_t minor = 0;
  std::string tag;
  nlohmann::json request;
  nlohmann::json response;
  long input_tokens = 0;
  long output_tokens = 0;
  long timestamp_ms = 0;
};

// Orders calls from parallel workers deterministically: workers sharing a
// stage get distinct slots; trace output sorts by (major, slot, minor).
// One scope belongs to one worker thread.
struct CallScope {
  uint64_t major = 0;
  uint32_t slot = 0;
  uint32_t next_minor = 0;
};

class Gateway {
 public:
  explicit Gateway(std::shared_ptr<Backend> backend,
                   TokenEstimator estimator = default_estimator());

  ChatResponse complete(const ChatRequest& request);
  ChatResponse complete(const ChatRequest& request, CallScope& scope);

  std::vector<CallScope> make_scopes(size_t count);

  const TokenLedger& ledger() const { return ledger_; }
  Backend& backend() { return *backend_; }
  bool deterministic() const { return backend_->deterministic(); }

  std::vector<TraceRecord> trace_snapshot() const;  // sorted
  // One JSONL record per call: tag, request, response, token counts,
  // timestamp (0 under deterministic backends).
  std::string trace_jsonl() const;
  void write_trace(const std::string& path) const;
  size_t trace_size() const;

 private:
  ChatResponse complete_at(const ChatRequest& request, uint64_t major,
                           uint32_t slot, uint32_t minor);
  std::shared_ptr<Backend> backend_;
  TokenEstimator estimator_;
  TokenLedger ledger_;
  mutable std::mutex trace_mutex_;
  std::vector<TraceRecord> trace_;
  uint64_t next_major_ = 0;
};

// --- structured-output extraction -----------------------------------------

// First well-formed JSON object in the content; fenced blocks win over
// bare braces. Empty optional on parse failure.
std::optional<nlohmann::json> extract_json_object(const std::string& content);

// Statements from fenced sql blocks, in order, comments preserved.
// Empty vector when no parseable payload exists.
std::vector<std::string> extract_sql_statements(const std::string& content);

enum class ActionTag { kExplore, kRefine, kSql, kConfirm };

struct TaggedAction {
  ActionTag tag;
  std::string body;
};

// The first bracketed token decides the action; anything else is a parse
// failure handled by the caller's fail-safe.
std::optional<TaggedAction> extract_action(const std::string& content);

const char* action_tag_name(ActionTag tag);

// Re-prompt helper: parse the response; on failure append the exchange and
// a corrective instruction, up to `retries` more attempts. Under a replay
// backend, retries stop early when the script has no matching entry left.
template <typename T, typename Parser>
std::pair<std::optional<T>, ChatResponse> complete_parsed(
    Gateway& gateway, ChatRequest request, Parser parse, int retries = 2,
    CallScope* scope = nullptr) {
  ChatResponse response;
  for (int attempt = 0; ; ++attempt) {
    response = scope ? gateway.complete(request, *scope) : gateway.complete(request);
    std::optional<T> parsed = parse(response.content);
    if (parsed) return {std::move(parsed), response};
    if (attempt >= retries) return {std::nullopt, response};
    request.messages.push_back({Role::kAssistant, response.content});
    request.messages.push_back(
        {Role::kUser,
         "Your previous output was unparseable. Reply again following the "
         "required output format exactly."});
    if (auto* replay = dynamic_cast<ReplayBackend*>(&gateway.backend());
        replay && !replay->has_match(request))
      return {std::nullopt, response};
  }
}

}  // namespace apexsql
