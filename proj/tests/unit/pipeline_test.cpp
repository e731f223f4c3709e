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

#include <fstream>

#include "iams/pipeline.hpp"
#include "iams/util.hpp"
#include "unit/test_util.hpp"

namespace iams {
namespace {

namespace fs = std::filesystem;
using testing::ExpectError;
using testing::FixtureFile;
using testing::MakeModel;

nlohmann::json BaseManifest() {
  return {{"model", "model.json"},
          {"seed", 17},
          {"scorer",
           {{"kind", "synthetic"},
            {"weights", {{"intercept", 0.3}, {"s0c0", 0.05}, {"s1c1", -0.04}, {"s0c0:s1c1", 0.02}}},
            {"noise_sd", 0.002}}},
          {"terms", {{"max_order", 2}}},
          {"fit", {{"kind", "ols"}, {"max_order", 2}, {"grid", "0.0001:0.001:0.0001"}}},
          {"selection", {{"alpha", 0.05}, {"max_level", 2}}},
          {"report", {{"bins", 8}}}};
}

fs::path MakeRunDir(const std::string& name, const nlohmann::json& manifest) {
  const auto dir = testing::TempDir(name);
  std::ofstream(dir / "model.json") << MakeModel({2, 2, 1}).ToJson().dump(2);
  std::ofstream(dir / "manifest.json") << manifest.dump(2);
  return dir;
}

std::string Read(const fs::path& p) { return ReadFileToString(p.string()); }

TEST(Pipeline, RunProducesEveryArtifact) {
  const auto dir = MakeRunDir("run", BaseManifest());
  Pipeline p(RunManifest::Load(dir / "manifest.json"), dir / "out");
  const auto summary = p.Run();
  for (const char* f : {"manifest.json", "subprompts.csv", "scores.jsonl", "scores.meta.json",
                        "fit.json", "lasso_path.csv", "selection_trace.jsonl",
                        "selection_fit.json", "shapley.csv", "shapley.json",
                        "report/coefficients.csv", "report/summary.json"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  }
  EXPECT_EQ(Read(dir / "out/manifest.json"), Read(dir / "manifest.json"));
  const auto hash = p.manifest().hash;
  EXPECT_EQ(hash, HexDigest(Fnv1a64(Read(dir / "manifest.json"))));
  const auto report = nlohmann::json::parse(Read(dir / "out/report/summary.json"));
  EXPECT_EQ(report["manifest_hash"], hash);
  std::ifstream trace(dir / "out/selection_trace.jsonl");
  for (std::string line; std::getline(trace, line);) {
    EXPECT_EQ(nlohmann::json::parse(line)["manifest_hash"], hash);
  }
  std::ifstream csv(dir / "out/shapley.csv");
  std::string first;
  std::getline(csv, first);
  EXPECT_EQ(first, "# manifest_hash=" + hash);
}

TEST(Pipeline, FitIsByteIdenticalAcrossRuns) {
  const auto dir = MakeRunDir("determinism", BaseManifest());
  {
    Pipeline p(RunManifest::Load(dir / "manifest.json"), dir / "out");
    p.Score();
    p.Fit();
    p.Shapley();
  }
  const std::string fit = Read(dir / "out/fit.json");
  const std::string shap = Read(dir / "out/shapley.json");
  const std::string scores = Read(dir / "out/scores.jsonl");
  {
    Pipeline p(RunManifest::Load(dir / "manifest.json"), dir / "out");
    EXPECT_EQ(p.Score()["new_records"], 0);
    p.Fit();
    p.Shapley();
  }
  EXPECT_EQ(Read(dir / "out/fit.json"), fit);
  EXPECT_EQ(Read(dir / "out/shapley.json"), shap);
  EXPECT_EQ(Read(dir / "out/scores.jsonl"), scores);

  fs::remove_all(dir / "out2");
  Pipeline fresh(RunManifest::Load(dir / "manifest.json"), dir / "out2");
  fresh.Score();
  fresh.Fit();
  EXPECT_EQ(Read(dir / "out2/fit.json"), fit);
}

TEST(Pipeline, MissingArtifactNamesTheProducer) {
  const auto dir = MakeRunDir("missing", BaseManifest());
  Pipeline p(RunManifest::Load(dir / "manifest.json"), dir / "out");
  ExpectError(ErrorCode::kMissingArtifact, [&] { p.Fit(); }, "run `iams score` first");
  ExpectError(ErrorCode::kMissingArtifact, [&] { p.Shapley(); }, "iams score");
  p.Score();
  ExpectError(ErrorCode::kMissingArtifact, [&] { p.Report(); }, "iams fit");
}

TEST(Pipeline, DifferentManifestIsRefused) {
  auto m = BaseManifest();
  const auto dir = MakeRunDir("provenance", m);
  {
    Pipeline p(RunManifest::Load(dir / "manifest.json"), dir / "out");
    p.Score();
  }
  m["seed"] = 18;
  std::ofstream(dir / "manifest.json") << m.dump(2);
  Pipeline p(RunManifest::Load(dir / "manifest.json"), dir / "out");
  ExpectError(ErrorCode::kProvenance, [&] { p.Fit(); }, "manifest hash");
}

TEST(Pipeline, OverridesKeepTheHash) {
  const auto dir = MakeRunDir("overrides", BaseManifest());
  RunOverrides o;
  o.lambda = 0.01;
  o.alpha = 0.01;
  Pipeline a(RunManifest::Load(dir / "manifest.json"), dir / "out");
  Pipeline b(RunManifest::Load(dir / "manifest.json"), dir / "out", o);
  EXPECT_EQ(a.manifest().hash, b.manifest().hash);
  EXPECT_EQ(b.manifest().lambda, 0.01);
  EXPECT_EQ(b.manifest().selection.alpha, 0.01);
  o = {};
  o.lambda = -1.0;
  ExpectError(ErrorCode::kInvalidArgument,
              [&] { Pipeline bad(RunManifest::Load(dir / "manifest.json"), dir / "out", o); });
}

TEST(RunManifest, SchemaErrorsNameTheField) {
  auto m = BaseManifest();
  m["fit"]["lamda"] = 0.1;
  ExpectError(ErrorCode::kValidation, [&] { RunManifest::Parse(m.dump(), "m.json"); },
              "fit.lamda");
  m = BaseManifest();
  m.erase("seed");
  ExpectError(ErrorCode::kValidation, [&] { RunManifest::Parse(m.dump(), "m.json"); }, "seed");
  m = BaseManifest();
  m["seed"] = "abc";
  ExpectError(ErrorCode::kValidation, [&] { RunManifest::Parse(m.dump(), "m.json"); }, "seed");
  m = BaseManifest();
  m["fit"]["kind"] = "ridge";
  ExpectError(ErrorCode::kValidation, [&] { RunManifest::Parse(m.dump(), "m.json"); },
              "fit.kind");
  m = BaseManifest();
  m["fit"]["max_order"] = 3;
  ExpectError(ErrorCode::kValidation, [&] { RunManifest::Parse(m.dump(), "m.json"); },
              "fit.max_order");
  ExpectError(ErrorCode::kValidation, [&] { RunManifest::Parse("{not json", "m.json"); },
              "m.json");

  m = BaseManifest();
  m["scorer"]["api_key"] = "sk-x";
  m["scorer"]["kind"] = "endpoint";
  const auto dir = MakeRunDir("schema", m);
  Pipeline p(RunManifest::Load(dir / "manifest.json"), dir / "out");
  ExpectError(ErrorCode::kValidation, [&] { p.Validate(); }, "api_key");

  m = BaseManifest();
  m["terms"]["interaction_strata"] = {"nope"};
  const auto dir2 = MakeRunDir("schema2", m);
  Pipeline q(RunManifest::Load(dir2 / "manifest.json"), dir2 / "out");
  ExpectError(ErrorCode::kValidation, [&] { q.Validate(); }, "nope");
}

TEST(Pipeline, ReplayScorerRunsOffline) {
  const auto dir = testing::TempDir("replay");
  for (const char* f : {"tiny_model.json", "success.jsonl", "replay_manifest.json"}) {
    fs::copy_file(FixtureFile(f), dir / f);
  }
  Pipeline p(RunManifest::Load(dir / "replay_manifest.json"), dir / "out");
  const auto s = p.Score();
  EXPECT_EQ(s["records"], 2);
  EXPECT_NEAR(s["baseline"].get<double>(), 0.22, 1e-12);
  ScoreStore store(dir / "out/scores.jsonl");
  const auto meta = nlohmann::json::parse(Read(dir / "out/scores.meta.json"));
  const auto rec = store.Find(meta["scorer_id"], "1+1=2|query", 0);
  ASSERT_TRUE(rec.has_value());
  EXPECT_NEAR(*rec->dcpmi, 2.0, 1e-12);
  EXPECT_EQ(meta["scorer_kind"], "replay");
}

}  // namespace
}  // namespace iams
