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

#include "iams/scoring.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <thread>

#include "iams/error.hpp"
#include "iams/util.hpp"

namespace iams {

nlohmann::ordered_json ScoreRecord::ToJson() const {
  nlohmann::ordered_json doc;
  doc["scorer_id"] = scorer_id;
  doc["subprompt_key"] = subprompt_key;
  doc["repeat"] = repeat;
  doc["raw"] = raw;
  doc["baseline"] = baseline ? nlohmann::ordered_json(*baseline) : nullptr;
  doc["dcpmi"] = dcpmi ? nlohmann::ordered_json(*dcpmi) : nullptr;
  doc["binary"] = binary ? nlohmann::ordered_json(*binary) : nullptr;
  doc["timestamp"] = timestamp;
  if (flagged) doc["flagged"] = true;
  return doc;
}

ScoreRecord ScoreRecord::FromJson(const nlohmann::json& doc) {
  try {
    ScoreRecord r;
    r.scorer_id = doc.at("scorer_id").get<std::string>();
    r.subprompt_key = doc.at("subprompt_key").get<std::string>();
    r.repeat = doc.at("repeat").get<int>();
    r.raw = doc.at("raw").get<double>();
    auto opt = [&](const char* field) -> std::optional<double> {
      auto it = doc.find(field);
      if (it == doc.end() || it->is_null()) return std::nullopt;
      return it->get<double>();
    };
    r.baseline = opt("baseline");
    r.dcpmi = opt("dcpmi");
    if (auto it = doc.find("binary"); it != doc.end() && !it->is_null()) {
      r.binary = it->get<int>();
    }
    r.timestamp = doc.value("timestamp", "");
    r.flagged = doc.value("flagged", false);
    return r;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kValidation, std::string("malformed score record: ") + e.what());
  }
}

double Dcpmi(double raw, double baseline) {
  if (!(raw >= 0.0 && raw <= 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "dcpmi: raw probability must lie in [0, 1]");
  }
  if (baseline == 0.0) {
    Fail(ErrorCode::kNumeric, "dcpmi: degenerate baseline (query-alone probability is 0)");
  }
  if (!(baseline > 0.0 && baseline <= 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "dcpmi: baseline probability must lie in (0, 1]");
  }
  return raw / baseline;
}

// --- store ----------------------------------------------------------------

ScoreStore::ScoreStore(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  std::size_t line_no = 0;
  std::streamoff line_start = 0;
  std::optional<std::streamoff> torn_at;
  while (true) {
    line_start = in.tellg();
    if (!std::getline(in, line)) break;
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      // A torn final line from an interrupted append is dropped, and cut
      // from the file so the next append starts on a fresh line.
      if (in.peek() == std::char_traits<char>::eof()) {
        torn_at = line_start;
        break;
      }
      Fail(ErrorCode::kValidation,
           path_.string() + ":" + std::to_string(line_no) + ": malformed JSON line");
    }
    ScoreRecord r = ScoreRecord::FromJson(doc);
    Key key{r.scorer_id, r.subprompt_key, r.repeat};
    records_[std::move(key)] = std::move(r);
  }
  in.close();
  if (torn_at) {
    std::filesystem::resize_file(path_, static_cast<std::uintmax_t>(*torn_at));
  } else if (line_no > 0) {
    std::ifstream tail(path_, std::ios::binary | std::ios::ate);
    tail.seekg(-1, std::ios::end);
    if (tail.get() != '\n') std::ofstream(path_, std::ios::app) << '\n';
  }
}

void ScoreStore::Append(const ScoreRecord& record) {
  std::lock_guard lock(mutex_);
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    if (!out) Fail(ErrorCode::kIo, "cannot append to " + path_.string());
    out << record.ToJson().dump() << '\n';
    out.flush();
    if (!out) Fail(ErrorCode::kIo, "append failed for " + path_.string());
  }
  records_[{record.scorer_id, record.subprompt_key, record.repeat}] = record;
}

std::optional<ScoreRecord> ScoreStore::Find(const std::string& scorer_id,
                                            const std::string& key, int repeat) const {
  std::lock_guard lock(mutex_);
  auto it = records_.find({scorer_id, key, repeat});
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::size_t ScoreStore::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::size_t ScoreStore::Erase(const std::vector<Key>& keys) {
  std::lock_guard lock(mutex_);
  std::size_t erased = 0;
  for (const auto& k : keys) erased += records_.erase(k);
  if (!path_.empty()) {
    std::string contents;
    for (const auto& [k, r] : records_) contents += r.ToJson().dump() + "\n";
    WriteFileAtomic(path_.string(), contents);
  }
  return erased;
}

// --- table ----------------------------------------------------------------

ResponseKind ParseResponseKind(std::string_view name) {
  if (name == "dcpmi") return ResponseKind::kDcpmi;
  if (name == "raw") return ResponseKind::kRaw;
  if (name == "binary") return ResponseKind::kBinary;
  Fail(ErrorCode::kValidation,
       "response must be \"dcpmi\", \"raw\" or \"binary\", got \"" + std::string(name) + "\"");
}

const char* ResponseKindName(ResponseKind kind) {
  switch (kind) {
    case ResponseKind::kDcpmi: return "dcpmi";
    case ResponseKind::kRaw: return "raw";
    case ResponseKind::kBinary: return "binary";
  }
  return "?";
}

namespace {

double ResponseOf(const ScoreRecord& r, ResponseKind kind) {
  switch (kind) {
    case ResponseKind::kRaw:
      return r.raw;
    case ResponseKind::kDcpmi:
      if (!r.dcpmi) {
        Fail(ErrorCode::kNumeric, "no DCPMI for '" + r.subprompt_key + "' repeat " +
                                      std::to_string(r.repeat) +
                                      " (degenerate baseline or raw score outside [0, 1])");
      }
      return *r.dcpmi;
    case ResponseKind::kBinary:
      if (!r.binary) {
        Fail(ErrorCode::kValidation, "no binary outcome for '" + r.subprompt_key + "'");
      }
      return *r.binary;
  }
  return 0.0;
}

}  // namespace

std::vector<double> ScoreTable::Response(ResponseKind kind) const {
  std::vector<double> y;
  y.reserve(records.size());
  for (const auto& r : records) y.push_back(ResponseOf(r, kind));
  return y;
}

std::map<std::string, double> ScoreTable::MeanByKey(ResponseKind kind) const {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& r : records) {
    auto& [sum, count] = acc[r.subprompt_key];
    sum += ResponseOf(r, kind);
    ++count;
  }
  std::map<std::string, double> out;
  for (const auto& [k, v] : acc) out[k] = v.first / v.second;
  return out;
}

ScoreTable ScoreTable::Assemble(std::string scorer_id, ScoreKind kind,
                                const std::vector<Subprompt>& subprompts, int repeats,
                                const std::vector<ScoreRecord>& records) {
  std::map<std::pair<std::string, int>, const ScoreRecord*> by_key;
  for (const auto& r : records) {
    if (r.scorer_id == scorer_id) by_key[{r.subprompt_key, r.repeat}] = &r;
  }
  ScoreTable table;
  table.scorer_id = std::move(scorer_id);
  table.score_kind = kind;
  table.repeats = repeats;
  for (const auto& s : subprompts) {
    for (int rep = 0; rep < repeats; ++rep) {
      auto it = by_key.find({s.key, rep});
      if (it == by_key.end()) {
        Fail(ErrorCode::kMissingArtifact, "score table is incomplete: no record for '" +
                                              s.key + "' repeat " + std::to_string(rep));
      }
      table.records.push_back(*it->second);
    }
  }
  return table;
}

// --- score_all ------------------------------------------------------------

namespace {

ScoreRecord MakeRecord(const std::string& scorer_id, const Subprompt& sub, int repeat,
                       const ScoreSample& sample, std::optional<double> baseline) {
  ScoreRecord r;
  r.scorer_id = scorer_id;
  r.subprompt_key = sub.key;
  r.repeat = repeat;
  r.raw = sample.raw;
  r.binary = sample.binary;
  r.flagged = sample.flagged;
  r.baseline = baseline;
  if (baseline && *baseline > 0.0 && *baseline <= 1.0 && sample.raw >= 0.0 &&
      sample.raw <= 1.0) {
    r.dcpmi = Dcpmi(sample.raw, *baseline);
  }
  r.timestamp = UtcTimestamp();
  return r;
}

ScoreSample ScoreWithRetries(Scorer& scorer, const Subprompt& sub, int repeat,
                             int max_retries) {
  for (int attempt = 0;; ++attempt) {
    try {
      return scorer.Score(sub, repeat);
    } catch (const std::exception& e) {
      if (attempt >= max_retries) {
        Fail(ErrorCode::kScorer, "scoring failed for '" + sub.key + "' repeat " +
                                     std::to_string(repeat) + " after " +
                                     std::to_string(attempt + 1) + " attempts: " + e.what());
      }
    }
  }
}

}  // namespace

ScoreTable ScoreAll(Scorer& scorer, const PromptModel& model,
                    const std::vector<Subprompt>& subprompts, ScoreStore& store,
                    const ScoreOptions& options) {
  if (options.repeats < 1) Fail(ErrorCode::kInvalidArgument, "repeats must be at least 1");
  const std::string scorer_id = scorer.id();

  std::vector<int> empty(model.num_strata(), kEmptySelection);
  empty[model.query_stratum()] = 0;
  for (int i = 0; i < model.num_strata(); ++i) {
    if (!model.is_variable(i)) empty[i] = 0;
  }
  const Subprompt query_only = MakeSubprompt(model, empty);

  std::vector<double> baselines(options.repeats);
  for (int rep = 0; rep < options.repeats; ++rep) {
    auto existing = store.Find(scorer_id, query_only.key, rep);
    if (!existing) {
      const ScoreSample sample =
          ScoreWithRetries(scorer, query_only, rep, options.max_retries);
      ScoreRecord r = MakeRecord(scorer_id, query_only, rep, sample, sample.raw);
      store.Append(r);
      existing = r;
    }
    baselines[rep] = existing->raw;
  }

  std::vector<std::pair<const Subprompt*, int>> pending;
  for (const auto& s : subprompts) {
    for (int rep = 0; rep < options.repeats; ++rep) {
      if (!store.Find(scorer_id, s.key, rep)) pending.emplace_back(&s, rep);
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::optional<Error> first_error;
  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) return;
      const auto [sub, rep] = pending[i];
      try {
        const ScoreSample sample = ScoreWithRetries(scorer, *sub, rep, options.max_retries);
        store.Append(MakeRecord(scorer_id, *sub, rep, sample, baselines[rep]));
      } catch (const Error& e) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = e;
        failed = true;
      }
    }
  };
  const int threads =
      std::max(1, std::min<int>(options.concurrency, static_cast<int>(pending.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) throw *first_error;

  std::vector<ScoreRecord> records;
  records.reserve(subprompts.size() * options.repeats);
  for (const auto& s : subprompts) {
    for (int rep = 0; rep < options.repeats; ++rep) {
      records.push_back(*store.Find(scorer_id, s.key, rep));
    }
  }
  const bool binary = !records.empty() && records.front().binary.has_value();
  return ScoreTable::Assemble(scorer_id, binary ? ScoreKind::kBinary : ScoreKind::kContinuous,
                              subprompts, options.repeats, records);
}

// --- synthetic oracle -----------------------------------------------------

SyntheticDefinition ParseSyntheticWeights(const PromptModel& model,
                                          const nlohmann::json& weights) {
  if (!weights.is_object()) {
    Fail(ErrorCode::kValidation, "synthetic weights must be an object of label -> weight");
  }
  SyntheticDefinition def;
  for (const auto& [label, value] : weights.items()) {
    if (!value.is_number()) {
      Fail(ErrorCode::kValidation, "synthetic weight for '" + label + "' is not a number");
    }
    if (label == kInterceptLabel) {
      def.intercept = value.get<double>();
    } else {
      def.weights.emplace_back(ParseTermLabel(model, label), value.get<double>());
    }
  }
  return def;
}

SyntheticOracle::SyntheticOracle(SyntheticDefinition definition)
    : def_(std::move(definition)) {
  if (!(def_.noise_sd >= 0.0)) {
    Fail(ErrorCode::kInvalidArgument, "synthetic oracle noise_sd must be >= 0");
  }
  char ibuf[64];
  std::snprintf(ibuf, sizeof(ibuf), "%.17g", def_.intercept);
  std::string fingerprint = "intercept=" + std::string(ibuf);
  for (const auto& [term, w] : def_.weights) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", w);
    fingerprint += ";" + term.label + "=" + buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", def_.noise_sd);
  fingerprint += ";noise=" + std::string(buf) + ";seed=" + std::to_string(def_.seed) +
                 ";binary=" + (def_.binary ? "1" : "0");
  id_ = "synthetic-" + HexDigest(Fnv1a64(fingerprint));
}

double SyntheticOracle::Linear(const Subprompt& subprompt) const {
  double value = def_.intercept;
  for (const auto& [term, w] : def_.weights) {
    if (term.active(subprompt.selections)) value += w;
  }
  return value;
}

ScoreSample SyntheticOracle::Score(const Subprompt& subprompt, int repeat) {
  std::uint64_t h = Fnv1a64(subprompt.key, 0xcbf29ce484222325ULL ^ def_.seed);
  h = Fnv1a64(std::to_string(repeat), h);
  std::mt19937_64 rng(h);
  double value = Linear(subprompt);
  if (def_.noise_sd > 0.0) {
    std::normal_distribution<double> noise(0.0, def_.noise_sd);
    value += noise(rng);
  }
  ScoreSample sample;
  if (def_.binary) {
    const double p = value >= 0 ? 1.0 / (1.0 + std::exp(-value))
                                : std::exp(value) / (1.0 + std::exp(value));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    sample.raw = p;
    sample.binary = unit(rng) < p ? 1 : 0;
  } else {
    sample.raw = value;
  }
  return sample;
}

}  // namespace iams
