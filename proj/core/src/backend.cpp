#include "ctrace/backend.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace ctrace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string to_string(CallTag tag) {
  switch (tag) {
    case CallTag::generation: return "generation";
    case CallTag::extraction: return "extraction";
    case CallTag::synthesis: return "synthesis";
    case CallTag::repair: return "repair";
    case CallTag::judge: return "judge";
  }
  return "generation";
}

std::string fixture_key(const CompletionRequest& req) {
  std::ostringstream material;
  char temp[32];
  std::snprintf(temp, sizeof(temp), "%.6f", req.temperature);
  material << to_string(req.tag) << '\x1f' << temp << '\x1f' << req.system << '\x1f'
           << req.user;
  std::string input = material.str();

  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(input.data(), input.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

void CallLedger::record(CallTag tag) {
  std::lock_guard<std::mutex> lock(mu_);
  ++counts_[tag];
}

void CallLedger::reset() {
  std::lock_guard<std::mutex> lock(mu_);
  counts_.clear();
}

std::map<std::string, int> CallLedger::totals() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::map<std::string, int> out;
  for (const auto& [tag, count] : counts_) out[to_string(tag)] = count;
  return out;
}

int CallLedger::total() const {
  std::lock_guard<std::mutex> lock(mu_);
  int sum = 0;
  for (const auto& [tag, count] : counts_) sum += count;
  return sum;
}

int CallLedger::count(CallTag tag) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = counts_.find(tag);
  return it == counts_.end() ? 0 : it->second;
}

void CallLedger::merge(const std::map<std::string, int>& totals) {
  std::lock_guard<std::mutex> lock(mu_);
  for (const auto& [name, count] : totals) {
    for (CallTag tag : {CallTag::generation, CallTag::extraction, CallTag::synthesis,
                        CallTag::repair, CallTag::judge}) {
      if (to_string(tag) == name) counts_[tag] += count;
    }
  }
}

void write_fixture(const std::string& dir, const CompletionRequest& req,
                   const std::string& response) {
  fs::create_directories(dir);
  std::string key = fixture_key(req);

  ordered_json doc;
  doc["key"] = key;
  doc["tag"] = to_string(req.tag);
  doc["temperature"] = req.temperature;
  doc["system"] = req.system;
  doc["user"] = req.user;
  doc["response"] = response;
  std::ofstream out(fs::path(dir) / (key + ".json"));
  out << doc.dump(2) << "\n";

  // Index file: key -> tag, sorted for stable bytes.
  fs::path index_path = fs::path(dir) / "index.json";
  nlohmann::json index = nlohmann::json::object();
  if (fs::exists(index_path)) {
    std::ifstream in(index_path);
    in >> index;
  }
  index[key] = to_string(req.tag);
  std::ofstream idx(index_path);
  idx << index.dump(2) << "\n";
}

ReplayBackend::ReplayBackend(std::string fixture_dir) : dir_(std::move(fixture_dir)) {}

std::string ReplayBackend::complete(const CompletionRequest& req) {
  std::string key = fixture_key(req);
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) {
      ledger_.record(req.tag);
      return it->second;
    }
  }
  fs::path path = fs::path(dir_) / (key + ".json");
  std::ifstream in(path);
  if (!in) {
    throw UnknownFixture("no fixture for tag " + to_string(req.tag) + ", key " +
                         key.substr(0, 12) + "...");
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedResponse("bad fixture file " + path.string() + ": " + e.what());
  }
  std::string response = doc.at("response").get<std::string>();
  {
    std::lock_guard<std::mutex> lock(mu_);
    cache_[key] = response;
  }
  ledger_.record(req.tag);
  return response;
}

std::string CallbackBackend::complete(const CompletionRequest& req) {
  std::string response = handler_(req);
  ledger_.record(req.tag);
  return response;
}

RecordBackend::RecordBackend(std::shared_ptr<LlmBackend> inner, std::string fixture_dir)
    : inner_(std::move(inner)), dir_(std::move(fixture_dir)) {}

std::string RecordBackend::complete(const CompletionRequest& req) {
  std::string response = inner_->complete(req);
  {
    std::lock_guard<std::mutex> lock(mu_);
    write_fixture(dir_, req, response);
  }
  ledger_.record(req.tag);
  return response;
}

HttpBackend::HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {}

std::string HttpBackend::complete(const CompletionRequest& req) {
  nlohmann::json body;
  body["model"] = options_.model;
  body["messages"] = {{{"role", "system"}, {"content", req.system}},
                      {{"role", "user"}, {"content", req.user}}};
  body["temperature"] = req.temperature;
  body["max_tokens"] = req.max_output;
  std::string payload = body.dump();

  int backoff = options_.backoff_ms;
  for (int attempt = 1;; ++attempt) {
    httplib::Client client(options_.base_url);
    client.set_connection_timeout(options_.timeout_seconds, 0);
    client.set_read_timeout(options_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!options_.api_key.empty())
      headers.emplace("Authorization", "Bearer " + options_.api_key);

    auto res = client.Post(options_.api_path, headers, payload, "application/json");
    if (res && res->status == 200) {
      try {
        auto doc = nlohmann::json::parse(res->body);
        std::string content =
            doc.at("choices").at(0).at("message").at("content").get<std::string>();
        ledger_.record(req.tag);
        return content;
      } catch (const nlohmann::json::exception& e) {
        throw MalformedResponse(std::string("bad completion body: ") + e.what());
      }
    }

    bool retryable = !res || res->status == 429;
    if (!res && attempt >= options_.max_attempts)
      throw Timeout("no response from " + options_.base_url + " after " +
                    std::to_string(attempt) + " attempts");
    if (res && res->status == 429 && attempt >= options_.max_attempts)
      throw RateLimited("429 from " + options_.base_url + " after " +
                        std::to_string(attempt) + " attempts");
    if (!retryable)
      throw BackendError("HTTP " + std::to_string(res->status) + " from " +
                         options_.base_url);

    std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
    backoff *= 2;
  }
}

}  // namespace ctrace
