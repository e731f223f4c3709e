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

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "iams/encoding.hpp"
#include "iams/prompt_model.hpp"
#include "json.hpp"

namespace iams {

struct ScoreRecord {
  std::string scorer_id;
  std::string subprompt_key;
  int repeat = 0;
  double raw = 0.0;  // P(correct token | subprompt), or the scorer's value
  std::optional<double> baseline;  // P(correct token | query alone)
  std::optional<double> dcpmi;     // raw / baseline
  std::optional<int> binary;
  std::string timestamp;
  bool flagged = false;  // target token was absent and raw was set to 0

  nlohmann::ordered_json ToJson() const;
  static ScoreRecord FromJson(const nlohmann::json& doc);
};

// Ratio of the subprompt probability to the query-alone probability.
// Throws Error(kNumeric) on a zero baseline.
double Dcpmi(double raw, double baseline);

struct ScoreSample {
  double raw = 0.0;
  std::optional<int> binary;
  bool flagged = false;
};

// Scorers must be safe to call concurrently.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::string id() const = 0;
  virtual ScoreSample Score(const Subprompt& subprompt, int repeat) = 0;
};

// Append-only JSON-lines store keyed by (scorer_id, subprompt_key, repeat).
// Loading keeps the last record per key. Appends are serialized.
class ScoreStore {
 public:
  using Key = std::tuple<std::string, std::string, int>;

  ScoreStore() = default;  // in-memory only
  explicit ScoreStore(std::filesystem::path path);

  const std::filesystem::path& path() const { return path_; }
  void Append(const ScoreRecord& record);
  std::optional<ScoreRecord> Find(const std::string& scorer_id, const std::string& key,
                                  int repeat) const;
  std::size_t size() const;
  // Drops matching records from memory and rewrites the file.
  std::size_t Erase(const std::vector<Key>& keys);

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<Key, ScoreRecord> records_;
};

enum class ScoreKind { kContinuous, kBinary };
enum class ResponseKind { kDcpmi, kRaw, kBinary };

ResponseKind ParseResponseKind(std::string_view name);
const char* ResponseKindName(ResponseKind kind);

// Records aligned with design-matrix rows: subprompt-major, then repeat.
struct ScoreTable {
  std::string scorer_id;
  ScoreKind score_kind = ScoreKind::kContinuous;
  int repeats = 1;
  std::vector<ScoreRecord> records;

  // Throws naming the first row whose value is missing.
  std::vector<double> Response(ResponseKind kind) const;
  // Mean response per subprompt key over repeats.
  std::map<std::string, double> MeanByKey(ResponseKind kind) const;

  // Aligns records by key, independent of their arrival order.
  static ScoreTable Assemble(std::string scorer_id, ScoreKind kind,
                             const std::vector<Subprompt>& subprompts, int repeats,
                             const std::vector<ScoreRecord>& records);
};

struct ScoreOptions {
  int repeats = 1;
  int concurrency = 1;   // in-flight scorer calls
  int max_retries = 2;   // extra attempts per (subprompt, repeat)
};

// Scores every (subprompt, repeat) pair not already in the store. The
// query-only subprompt is scored first and supplies each record's baseline.
ScoreTable ScoreAll(Scorer& scorer, const PromptModel& model,
                    const std::vector<Subprompt>& subprompts, ScoreStore& store,
                    const ScoreOptions& options = {});

struct SyntheticDefinition {
  double intercept = 0.0;
  std::vector<std::pair<TermDescriptor, double>> weights;
  double noise_sd = 0.0;
  std::uint64_t seed = 0;
  // Binary variant: Bernoulli draw with p = sigmoid(linear + noise).
  bool binary = false;
};

// Parses {"intercept": w, "<term label>": w, ...}.
SyntheticDefinition ParseSyntheticWeights(const PromptModel& model,
                                          const nlohmann::json& weights);

// Deterministic scorer from a hidden linear model over terms. Noise is a
// function of (seed, subprompt key, repeat) only.
class SyntheticOracle : public Scorer {
 public:
  explicit SyntheticOracle(SyntheticDefinition definition);

  std::string id() const override { return id_; }
  ScoreSample Score(const Subprompt& subprompt, int repeat) override;
  double Linear(const Subprompt& subprompt) const;

 private:
  SyntheticDefinition def_;
  std::string id_;
};

}  // namespace iams
