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

#include "iams/backends.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <set>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "iams/error.hpp"
#include "iams/util.hpp"

namespace iams {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void ScorerFail(const std::string& message) { Fail(ErrorCode::kScorer, message); }

}  // namespace

EndpointConfig EndpointConfig::FromJson(const json& doc) {
  static const std::set<std::string> allowed = {
      "kind",        "base_url",   "model_name", "api_key_env", "target_token",
      "top_logprobs", "timeout_ms", "max_retries", "backoff_ms", "permissive",
      "mode",        "expected",   "max_tokens_binary", "fixtures"};
  if (!doc.is_object()) Fail(ErrorCode::kValidation, "scorer: expected an object");
  for (const auto& [name, v] : doc.items()) {
    if (name == "api_key" || name == "key" || name == "token") {
      Fail(ErrorCode::kValidation,
           "scorer." + name + ": credentials are read from the environment variable "
           "named by api_key_env, never from configuration");
    }
    if (!allowed.count(name)) Fail(ErrorCode::kValidation, "scorer: unknown field '" + name + "'");
  }
  EndpointConfig c;
  try {
    c.base_url = doc.value("base_url", "");
    c.model_name = doc.value("model_name", "");
    c.api_key_env = doc.value("api_key_env", "");
    c.target_token = doc.value("target_token", c.target_token);
    c.top_logprobs = doc.value("top_logprobs", c.top_logprobs);
    c.timeout_ms = doc.value("timeout_ms", c.timeout_ms);
    c.max_retries = doc.value("max_retries", c.max_retries);
    c.backoff_ms = doc.value("backoff_ms", c.backoff_ms);
    c.permissive = doc.value("permissive", c.permissive);
    c.expected = doc.value("expected", c.expected);
    c.max_tokens_binary = doc.value("max_tokens_binary", c.max_tokens_binary);
    const std::string mode = doc.value("mode", "probability");
    if (mode == "probability") {
      c.mode = EndpointMode::kProbability;
    } else if (mode == "binary") {
      c.mode = EndpointMode::kBinary;
    } else {
      Fail(ErrorCode::kValidation, "scorer.mode: expected \"probability\" or \"binary\"");
    }
  } catch (const json::exception& e) {
    Fail(ErrorCode::kValidation, std::string("scorer: ") + e.what());
  }
  c.Validate();
  return c;
}

void EndpointConfig::Validate() const {
  if (model_name.empty()) Fail(ErrorCode::kValidation, "scorer.model_name is required");
  if (target_token.empty()) Fail(ErrorCode::kValidation, "scorer.target_token is empty");
  if (top_logprobs < 1) Fail(ErrorCode::kValidation, "scorer.top_logprobs must be >= 1");
  if (max_retries < 0) Fail(ErrorCode::kValidation, "scorer.max_retries must be >= 0");
  if (timeout_ms < 1) Fail(ErrorCode::kValidation, "scorer.timeout_ms must be >= 1");
  if (mode == EndpointMode::kBinary && expected.empty()) {
    Fail(ErrorCode::kValidation, "scorer.expected must be non-empty in binary mode");
  }
}

// --- transports -------------------------------------------------------------

HttpTransport::HttpTransport(std::string base_url, int timeout_ms) : timeout_ms_(timeout_ms) {
  const std::size_t scheme = base_url.find("://");
  if (scheme == std::string::npos) {
    Fail(ErrorCode::kValidation, "base_url '" + base_url + "' has no scheme");
  }
  const std::size_t slash = base_url.find('/', scheme + 3);
  host_ = base_url.substr(0, slash);
  prefix_ = slash == std::string::npos ? "" : base_url.substr(slash);
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

HttpResponse HttpTransport::Post(const HttpRequest& request) {
  httplib::Client client(host_);
  const auto timeout = std::chrono::milliseconds(timeout_ms_);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);
  auto result = client.Post(prefix_ + request.path, headers, request.body, "application/json");
  if (!result) {
    ScorerFail("transport failure: " + httplib::to_string(result.error()));
  }
  return {result->status, result->body};
}

std::string CanonicalBody(std::string_view body) {
  try {
    return json::parse(body).dump();
  } catch (const json::parse_error&) {
    return std::string(body);
  }
}

ReplayTransport::ReplayTransport(const std::filesystem::path& fixture) {
  std::ifstream in(fixture);
  if (!in) Fail(ErrorCode::kIo, "cannot open replay fixture " + fixture.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = fixture.string() + ":" + std::to_string(line_no);
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error&) {
      Fail(ErrorCode::kValidation, where + ": malformed fixture line");
    }
    if (!doc.contains("request")) Fail(ErrorCode::kValidation, where + ": missing request");
    Entry entry;
    if (doc.contains("error")) {
      entry.error = doc["error"].get<std::string>();
    } else {
      const json& resp = doc.at("response");
      HttpResponse r;
      r.status = resp.value("status", 200);
      const json& body = resp.at("body");
      r.body = body.is_string() ? body.get<std::string>() : body.dump();
      entry.response = std::move(r);
    }
    entries_[doc["request"].dump()].push_back(std::move(entry));
  }
}

HttpResponse ReplayTransport::Post(const HttpRequest& request) {
  std::lock_guard lock(mutex_);
  ++calls_;
  auto it = entries_.find(CanonicalBody(request.body));
  if (it == entries_.end() || it->second.empty()) {
    ScorerFail("no replay fixture for request " + request.body);
  }
  Entry entry = it->second.front();
  if (it->second.size() > 1) it->second.pop_front();
  if (!entry.response) ScorerFail("transport failure: " + entry.error);
  return *entry.response;
}

std::size_t ReplayTransport::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

RecordingTransport::RecordingTransport(std::unique_ptr<Transport> inner,
                                       std::filesystem::path fixture)
    : inner_(std::move(inner)), fixture_(std::move(fixture)) {}

HttpResponse RecordingTransport::Post(const HttpRequest& request) {
  json line;
  try {
    line["request"] = json::parse(request.body);
  } catch (const json::parse_error&) {
    line["request"] = request.body;
  }
  HttpResponse response;
  try {
    response = inner_->Post(request);
    json body;
    try {
      body = json::parse(response.body);
    } catch (const json::parse_error&) {
      body = response.body;
    }
    line["response"] = {{"status", response.status}, {"body", body}};
  } catch (const Error& e) {
    line["error"] = e.what();
    std::lock_guard lock(mutex_);
    std::ofstream(fixture_, std::ios::app) << line.dump() << '\n';
    throw;
  }
  std::lock_guard lock(mutex_);
  std::ofstream(fixture_, std::ios::app) << line.dump() << '\n';
  return response;
}

// --- client -----------------------------------------------------------------

CompletionClient::CompletionClient(EndpointConfig config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  config_.Validate();
  if (!transport_) Fail(ErrorCode::kInvalidArgument, "completion client needs a transport");
}

std::string CompletionClient::ProbabilityRequestBody(std::string_view prompt) const {
  ordered_json body;
  body["model"] = config_.model_name;
  body["prompt"] = prompt;
  body["max_tokens"] = 1;
  body["temperature"] = 0;
  body["logprobs"] = config_.top_logprobs;
  return body.dump();
}

std::string CompletionClient::BinaryRequestBody(std::string_view prompt) const {
  ordered_json body;
  body["model"] = config_.model_name;
  body["prompt"] = prompt;
  body["max_tokens"] = config_.max_tokens_binary;
  body["temperature"] = 0;
  return body.dump();
}

json CompletionClient::Exchange(const std::string& body) const {
  HttpRequest request;
  request.path = "/v1/completions";
  request.body = body;
  request.headers.emplace_back("Content-Type", "application/json");
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      request.headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }
  }
  std::string last_failure;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0 && config_.backoff_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(
          static_cast<long>(config_.backoff_ms) << std::min(attempt - 1, 6)));
    }
    HttpResponse response;
    try {
      response = transport_->Post(request);
    } catch (const Error& e) {
      last_failure = e.what();
      continue;
    }
    if (response.status == 429 || response.status >= 500) {
      last_failure = "HTTP " + std::to_string(response.status);
      continue;
    }
    if (response.status < 200 || response.status >= 300) {
      ScorerFail("endpoint returned HTTP " + std::to_string(response.status) + ": " +
                 response.body.substr(0, 200));
    }
    try {
      return json::parse(response.body);
    } catch (const json::parse_error&) {
      ScorerFail("malformed response: body is not JSON");
    }
  }
  ScorerFail("endpoint unavailable after " + std::to_string(config_.max_retries + 1) +
             " attempts: " + last_failure);
}

CompletionClient::Probability CompletionClient::FirstTokenProbability(
    std::string_view prompt) const {
  if (prompt.empty()) Fail(ErrorCode::kInvalidArgument, "prompt text is empty");
  const json doc = Exchange(ProbabilityRequestBody(prompt));
  const json* top = nullptr;
  try {
    const json& candidates = doc.at("choices").at(0).at("logprobs").at("top_logprobs");
    top = &candidates.at(0);
  } catch (const json::exception&) {
    ScorerFail("malformed response: missing choices[0].logprobs.top_logprobs[0]");
  }
  if (!top->is_object()) {
    ScorerFail("malformed response: top_logprobs[0] is not an object");
  }
  auto it = top->find(config_.target_token);
  if (it == top->end()) {
    if (config_.permissive) return {0.0, true};
    ScorerFail("token not in top-k: '" + config_.target_token + "' absent from " +
               std::to_string(top->size()) + " candidates");
  }
  if (!it->is_number()) ScorerFail("malformed response: logprob is not a number");
  const double logprob = it->get<double>();
  if (std::isnan(logprob) || logprob > 0.0) {
    ScorerFail("malformed response: logprob " + std::to_string(logprob) + " is not <= 0");
  }
  return {std::exp(logprob), false};
}

int CompletionClient::BinaryCorrectness(std::string_view prompt,
                                        std::string_view expected) const {
  if (expected.empty()) Fail(ErrorCode::kInvalidArgument, "expected answer is empty");
  if (prompt.empty()) Fail(ErrorCode::kInvalidArgument, "prompt text is empty");
  const json doc = Exchange(BinaryRequestBody(prompt));
  std::string text;
  try {
    text = doc.at("choices").at(0).at("text").get<std::string>();
  } catch (const json::exception&) {
    ScorerFail("malformed response: missing choices[0].text");
  }
  const std::size_t start = text.find_first_not_of(" \t\r\n");
  if (start == std::string::npos) return 0;
  return std::string_view(text).substr(start).starts_with(expected) ? 1 : 0;
}

EndpointScorer::EndpointScorer(CompletionClient client) : client_(std::move(client)) {
  const auto& c = client_.config();
  const std::string fingerprint =
      c.model_name + "|" + c.target_token + "|" +
      (c.mode == EndpointMode::kBinary ? "binary|" + c.expected : "probability");
  id_ = "endpoint-" + HexDigest(Fnv1a64(fingerprint));
}

ScoreSample EndpointScorer::Score(const Subprompt& subprompt, int /*repeat*/) {
  ScoreSample sample;
  if (client_.config().mode == EndpointMode::kBinary) {
    const int hit = client_.BinaryCorrectness(subprompt.rendered, client_.config().expected);
    sample.raw = hit;
    sample.binary = hit;
  } else {
    const auto p = client_.FirstTokenProbability(subprompt.rendered);
    sample.raw = p.value;
    sample.flagged = p.flagged;
  }
  return sample;
}

}  // namespace iams
