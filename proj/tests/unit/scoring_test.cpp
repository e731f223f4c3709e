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

#include <algorithm>
#include <atomic>
#include <fstream>
#include <random>

#include "iams/scoring.hpp"
#include "iams/util.hpp"
#include "unit/test_util.hpp"

namespace iams {
namespace {

using testing::ExpectError;
using testing::MakeModel;

// Counts calls and scores by the number of selected components.
class CountingScorer : public Scorer {
 public:
  std::string id() const override { return "counting"; }
  ScoreSample Score(const Subprompt& s, int repeat) override {
    ++calls;
    if (fail_key == s.key) throw std::runtime_error("boom");
    if (flaky_key == s.key && flaky_failures-- > 0) throw std::runtime_error("flaky");
    int active = 0;
    for (std::size_t i = 0; i + 1 < s.selections.size(); ++i) active += s.selections[i] >= 0;
    return {0.2 + 0.1 * active + 0.01 * repeat, std::nullopt, false};
  }
  std::atomic<int> calls{0};
  std::string fail_key;
  std::string flaky_key;
  std::atomic<int> flaky_failures{0};
};

TEST(Dcpmi, Examples) {
  for (double b : {1e-9, 0.22, 0.38, 0.5, 1.0}) EXPECT_EQ(Dcpmi(b, b), 1.0);
  EXPECT_DOUBLE_EQ(Dcpmi(0.76, 0.38), 2.0);
  ExpectError(ErrorCode::kNumeric, [] { Dcpmi(0.5, 0.0); }, "degenerate baseline");
  ExpectError(ErrorCode::kInvalidArgument, [] { Dcpmi(1.5, 0.5); });
  ExpectError(ErrorCode::kInvalidArgument, [] { Dcpmi(0.5, 1.5); });
}

TEST(Synthetic, Examples) {
  const PromptModel m = MakeModel({2, 1});
  const auto subs = EnumerateSubprompts(m);
  SyntheticDefinition def;
  def.intercept = 1.0;
  SyntheticOracle constant(def);
  for (const auto& s : subs) EXPECT_EQ(constant.Score(s, 0).raw, 1.0);

  def = ParseSyntheticWeights(m, {{"intercept", 1.0}, {"s0c1", 0.5}});
  SyntheticOracle additive(def);
  for (const auto& s : subs) {
    EXPECT_EQ(additive.Score(s, 0).raw, s.selections[0] == 1 ? 1.5 : 1.0);
  }
  def.noise_sd = -1.0;
  ExpectError(ErrorCode::kInvalidArgument, [&] { SyntheticOracle bad(def); });
  ExpectError(ErrorCode::kValidation, [&] { ParseSyntheticWeights(m, {{"zzz", 1.0}}); });
}

TEST(Synthetic, NoiseIsSeededAndIndependentOfRendering) {
  const PromptModel a = MakeModel({2, 1});
  PromptModelSpec spec;
  spec.separator = " ## ";
  for (const auto& s : a.strata()) {
    StratumSpec ss{s.name, s.kind, {}};
    for (const auto& c : s.components) ss.components.push_back({c.id, c.text + "!", c.tags});
    spec.strata.push_back(ss);
  }
  spec.query_stratum = a.query_stratum();
  const PromptModel b = PromptModel::Build(spec);
  SyntheticDefinition def = ParseSyntheticWeights(a, {{"intercept", 0.3}, {"s1c0", 0.2}});
  def.noise_sd = 0.05;
  def.seed = 42;
  SyntheticOracle oa(def), ob(def);
  const auto sa = EnumerateSubprompts(a), sb = EnumerateSubprompts(b);
  for (std::size_t i = 0; i < sa.size(); ++i) {
    EXPECT_EQ(oa.Score(sa[i], 0).raw, ob.Score(sb[i], 0).raw);
    EXPECT_EQ(oa.Score(sa[i], 1).raw, oa.Score(sa[i], 1).raw);
    EXPECT_NE(oa.Score(sa[i], 0).raw, oa.Score(sa[i], 1).raw);
  }
  def.seed = 43;
  SyntheticOracle other(def);
  EXPECT_NE(other.Score(sa[0], 0).raw, oa.Score(sa[0], 0).raw);
  EXPECT_NE(other.id(), oa.id());
}

TEST(Synthetic, BinaryVariant) {
  const PromptModel m = MakeModel({1});
  SyntheticDefinition def = ParseSyntheticWeights(m, {{"intercept", 40.0}, {"s0c0", -80.0}});
  def.binary = true;
  SyntheticOracle o(def);
  const auto subs = EnumerateSubprompts(m);
  EXPECT_EQ(o.Score(subs[0], 0).binary, 1);
  EXPECT_EQ(o.Score(subs[1], 0).binary, 0);
}

TEST(ScoreRecord, JsonFieldNamesAndRoundTrip) {
  ScoreRecord r;
  r.scorer_id = "s";
  r.subprompt_key = "a|-|query";
  r.repeat = 2;
  r.raw = 0.25;
  r.baseline = 0.5;
  r.dcpmi = 0.5;
  r.timestamp = "2026-01-01T00:00:00Z";
  const auto j = r.ToJson();
  std::vector<std::string> names;
  for (const auto& [k, v] : j.items()) names.push_back(k);
  EXPECT_EQ(names, (std::vector<std::string>{"scorer_id", "subprompt_key", "repeat", "raw",
                                             "baseline", "dcpmi", "binary", "timestamp"}));
  EXPECT_TRUE(j["binary"].is_null());
  const ScoreRecord back = ScoreRecord::FromJson(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.ToJson().dump(), j.dump());
}

TEST(ScoreAll, RepeatsMultiplyRecordsAndBaselineFirst) {
  const PromptModel m = MakeModel({2, 1});
  const auto subs = EnumerateSubprompts(m);
  ScoreStore store;
  CountingScorer scorer;
  const ScoreTable t = ScoreAll(scorer, m, subs, store, {3, 1, 0});
  EXPECT_EQ(t.records.size(), 18u);
  EXPECT_EQ(scorer.calls.load(), 18);
  for (const auto& r : t.records) {
    ASSERT_TRUE(r.baseline.has_value());
    EXPECT_DOUBLE_EQ(*r.dcpmi, r.raw / *r.baseline);
  }
  EXPECT_EQ(t.records[0].subprompt_key, subs[0].key);
  EXPECT_EQ(*t.records[0].dcpmi, 1.0);
}

TEST(ScoreAll, ResumesAndIsIdempotent) {
  const auto dir = testing::TempDir("resume");
  const PromptModel m = MakeModel({2, 2, 1});
  const auto subs = EnumerateSubprompts(m);
  const auto file = dir / "scores.jsonl";
  CountingScorer scorer;
  {
    ScoreStore store(file);
    ScoreAll(scorer, m, subs, store, {1, 3, 0});
  }
  EXPECT_EQ(scorer.calls.load(), static_cast<int>(subs.size()));
  scorer.calls = 0;
  {
    ScoreStore store(file);
    const ScoreTable t = ScoreAll(scorer, m, subs, store);
    EXPECT_EQ(t.records.size(), subs.size());
  }
  EXPECT_EQ(scorer.calls.load(), 0);
  {
    ScoreStore store(file);
    std::vector<ScoreStore::Key> drop;
    for (int i = 1; i <= 5; ++i) drop.emplace_back("counting", subs[i * 3].key, 0);
    EXPECT_EQ(store.Erase(drop), 5u);
  }
  {
    ScoreStore store(file);
    ScoreAll(scorer, m, subs, store);
  }
  EXPECT_EQ(scorer.calls.load(), 5);
}

TEST(ScoreAll, FailureReportsKeyAndKeepsProgress) {
  const auto dir = testing::TempDir("failure");
  const PromptModel m = MakeModel({3});
  const auto subs = EnumerateSubprompts(m);
  CountingScorer scorer;
  scorer.fail_key = subs[2].key;
  {
    ScoreStore store(dir / "scores.jsonl");
    ExpectError(ErrorCode::kScorer, [&] { ScoreAll(scorer, m, subs, store, {1, 1, 2}); },
                subs[2].key);
  }
  ScoreStore reread(dir / "scores.jsonl");
  EXPECT_EQ(reread.size(), 2u);  // baseline and the first variable subprompt
}

TEST(ScoreAll, RetriesTransientFailures) {
  const PromptModel m = MakeModel({2});
  const auto subs = EnumerateSubprompts(m);
  CountingScorer scorer;
  scorer.flaky_key = subs[1].key;
  scorer.flaky_failures = 2;
  ScoreStore store;
  const ScoreTable t = ScoreAll(scorer, m, subs, store, {1, 1, 2});
  EXPECT_EQ(t.records.size(), 3u);
  EXPECT_EQ(scorer.calls.load(), 5);
}

TEST(ScoreTable, AlignmentIgnoresArrivalOrder) {
  const PromptModel m = MakeModel({2, 1});
  const auto subs = EnumerateSubprompts(m);
  ScoreStore store;
  CountingScorer scorer;
  const ScoreTable t = ScoreAll(scorer, m, subs, store, {2, 1, 0});
  auto shuffled = t.records;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(4));
  const ScoreTable again =
      ScoreTable::Assemble(t.scorer_id, t.score_kind, subs, 2, shuffled);
  EXPECT_EQ(again.Response(ResponseKind::kRaw), t.Response(ResponseKind::kRaw));
  EXPECT_EQ(again.Response(ResponseKind::kDcpmi), t.Response(ResponseKind::kDcpmi));
  shuffled.pop_back();
  ExpectError(ErrorCode::kMissingArtifact,
              [&] { ScoreTable::Assemble(t.scorer_id, t.score_kind, subs, 2, shuffled); });
  ExpectError(ErrorCode::kValidation, [&] { t.Response(ResponseKind::kBinary); });
  const auto means = t.MeanByKey(ResponseKind::kRaw);
  EXPECT_DOUBLE_EQ(means.at(subs[0].key), 0.205);
}

TEST(ScoreStore, LastRecordWinsAndTornLineIsDropped) {
  const auto dir = testing::TempDir("store");
  const auto file = dir / "scores.jsonl";
  ScoreRecord r;
  r.scorer_id = "s";
  r.subprompt_key = "k";
  r.raw = 0.1;
  {
    std::ofstream out(file);
    out << r.ToJson().dump() << "\n";
    r.raw = 0.2;
    out << r.ToJson().dump() << "\n";
    out << R"({"scorer_id":"s","subprompt_key":"k2","rep)";
  }
  {
    ScoreStore store(file);
    EXPECT_EQ(store.size(), 1u);
    EXPECT_EQ(store.Find("s", "k", 0)->raw, 0.2);
    r.subprompt_key = "k3";
    store.Append(r);
  }
  ScoreStore again(file);
  EXPECT_EQ(again.size(), 2u);
  EXPECT_TRUE(again.Find("s", "k3", 0).has_value());

  {
    std::ofstream out(file, std::ios::app);
    out << "garbage\n" << r.ToJson().dump() << "\n";
  }
  ExpectError(ErrorCode::kValidation, [&] { ScoreStore bad(file); }, "malformed");
}

TEST(ScoreAll, ConcurrentScoringMatchesSerial) {
  const PromptModel m = MakeModel({3, 2, 2, 1});
  const auto subs = EnumerateSubprompts(m);
  SyntheticDefinition def = ParseSyntheticWeights(m, {{"intercept", 0.4}, {"s0c2", 0.1}});
  def.noise_sd = 0.01;
  def.seed = 9;
  SyntheticOracle a(def), b(def);
  ScoreStore s1, s2;
  const auto t1 = ScoreAll(a, m, subs, s1, {2, 1, 0});
  const auto t2 = ScoreAll(b, m, subs, s2, {2, 4, 0});
  EXPECT_EQ(t1.Response(ResponseKind::kDcpmi), t2.Response(ResponseKind::kDcpmi));
}

}  // namespace
}  // namespace iams
