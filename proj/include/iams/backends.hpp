/*
 * Copyright 2026 The IAMs Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "iams/scoring.hpp"
#include "json.hpp"

namespace iams {

enum class EndpointMode { kProbability, kBinary };

// Settings for an OpenAI-compatible completions endpoint. The credential is
// only ever read from the environment variable named by api_key_env.
struct EndpointConfig {
  std::string base_url;
  std::string model_name;
  std::string api_key_env;
  std::string target_token = "5";  // sent verbatim; some tokenizers need " 5"
  int top_logprobs = 20;
  int timeout_ms = 30000;
  int max_retries = 3;
  int backoff_ms = 250;
  bool permissive = false;  // absent target token scores 0 instead of failing
  EndpointMode mode = EndpointMode::kProbability;
  std::string expected = "5";
  int max_tokens_binary = 4;

  static EndpointConfig FromJson(const nlohmann::json& doc);
  void Validate() const;
};

struct HttpRequest {
  std::string path;
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Throws Error(kScorer) on connection-level failures.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse Post(const HttpRequest& request) = 0;
};

class HttpTransport : public Transport {
 public:
  HttpTransport(std::string base_url, int timeout_ms);
  HttpResponse Post(const HttpRequest& request) override;

 private:
  std::string host_;    // scheme://host[:port]
  std::string prefix_;  // path component of base_url, without trailing '/'
  int timeout_ms_;
};

// Serves responses from a JSON-lines fixture. Each line is
// {"request": <body>, "response": {"status": int, "body": <json or string>}}
// or {"request": <body>, "error": "<transport failure>"}. Entries sharing a
// request body are served in file order; the last one repeats.
class ReplayTransport : public Transport {
 public:
  explicit ReplayTransport(const std::filesystem::path& fixture);
  HttpResponse Post(const HttpRequest& request) override;
  std::size_t calls() const;

 private:
  struct Entry {
    std::optional<HttpResponse> response;
    std::string error;
  };
  mutable std::mutex mutex_;
  std::map<std::string, std::deque<Entry>> entries_;
  std::size_t calls_ = 0;
};

// Forwards to another transport and appends each exchange to a fixture file
// in the ReplayTransport format.
class RecordingTransport : public Transport {
 public:
  RecordingTransport(std::unique_ptr<Transport> inner, std::filesystem::path fixture);
  HttpResponse Post(const HttpRequest& request) override;

 private:
  std::unique_ptr<Transport> inner_;
  std::filesystem::path fixture_;
  std::mutex mutex_;
};

// Canonical form of a JSON request body used to match fixtures.
std::string CanonicalBody(std::string_view body);

class CompletionClient {
 public:
  CompletionClient(EndpointConfig config, std::shared_ptr<Transport> transport);

  const EndpointConfig& config() const { return config_; }

  // Byte-stable request bodies: fixed field order, temperature 0.
  std::string ProbabilityRequestBody(std::string_view prompt) const;
  std::string BinaryRequestBody(std::string_view prompt) const;

  struct Probability {
    double value = 0.0;
    bool flagged = false;  // permissive mode and the token was absent
  };
  // exp(logprob) of the target token among the first position's top
  // candidates.
  Probability FirstTokenProbability(std::string_view prompt) const;
  // 1 iff the completion, after trimming leading whitespace, starts with
  // `expected`.
  int BinaryCorrectness(std::string_view prompt, std::string_view expected) const;

 private:
  nlohmann::json Exchange(const std::string& body) const;

  EndpointConfig config_;
  std::shared_ptr<Transport> transport_;
};

class EndpointScorer : public Scorer {
 public:
  explicit EndpointScorer(CompletionClient client);
  std::string id() const override { return id_; }
  ScoreSample Score(const Subprompt& subprompt, int repeat) override;

 private:
  CompletionClient client_;
  std::string id_;
};

}  // namespace iams
