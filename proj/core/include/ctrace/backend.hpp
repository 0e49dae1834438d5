#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

namespace ctrace {

enum class CallTag { generation, extraction, synthesis, repair, judge };

std::string to_string(CallTag tag);

struct CompletionRequest {
  std::string system;
  std::string user;
  double temperature = 0.0;
  int max_output = 4096;
  CallTag tag = CallTag::generation;
};

// SHA-256 over (tag, system, user, temperature); hex string.
std::string fixture_key(const CompletionRequest& req);

struct BackendError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct Timeout : BackendError {
  using BackendError::BackendError;
};
struct RateLimited : BackendError {
  using BackendError::BackendError;
};
struct MalformedResponse : BackendError {
  using BackendError::BackendError;
};
struct UnknownFixture : BackendError {
  using BackendError::BackendError;
};

// Per-tag monotone call counters; safe for concurrent updates.
class CallLedger {
 public:
  void record(CallTag tag);
  void reset();
  std::map<std::string, int> totals() const;
  int total() const;
  int count(CallTag tag) const;
  void merge(const std::map<std::string, int>& totals);

 private:
  mutable std::mutex mu_;
  std::map<CallTag, int> counts_;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string complete(const CompletionRequest& req) = 0;
  CallLedger& ledger() { return ledger_; }

 protected:
  CallLedger ledger_;
};

// Exact-match fixture lookup; a miss is an error, never a live call.
class ReplayBackend : public LlmBackend {
 public:
  explicit ReplayBackend(std::string fixture_dir);
  std::string complete(const CompletionRequest& req) override;

 private:
  std::string dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> cache_;
};

// Delegates to a callable; used for scripted tests and fixture generation.
class CallbackBackend : public LlmBackend {
 public:
  using Handler = std::function<std::string(const CompletionRequest&)>;
  explicit CallbackBackend(Handler handler) : handler_(std::move(handler)) {}
  std::string complete(const CompletionRequest& req) override;

 private:
  Handler handler_;
};

// Calls the inner backend and persists every response as a fixture.
class RecordBackend : public LlmBackend {
 public:
  RecordBackend(std::shared_ptr<LlmBackend> inner, std::string fixture_dir);
  std::string complete(const CompletionRequest& req) override;

 private:
  std::shared_ptr<LlmBackend> inner_;
  std::string dir_;
  std::mutex mu_;
};

void write_fixture(const std::string& dir, const CompletionRequest& req,
                   const std::string& response);

struct HttpBackendOptions {
  std::string base_url;   // e.g. "http://localhost:8080"
  std::string api_path = "/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  std::string api_key;    // usually from the environment
  int timeout_seconds = 120;
  int max_attempts = 3;   // retry ceiling for timeouts / 429s
  int backoff_ms = 250;   // doubled per retry
};

// OpenAI-compatible chat-completions client.
class HttpBackend : public LlmBackend {
 public:
  explicit HttpBackend(HttpBackendOptions options);
  std::string complete(const CompletionRequest& req) override;

 private:
  HttpBackendOptions options_;
};

}  // namespace ctrace
