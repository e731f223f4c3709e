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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "iams/prompt_model.hpp"
#include "iams/regression.hpp"
#include "iams/scoring.hpp"
#include "iams/selection.hpp"
#include "json.hpp"

namespace iams {

enum class FitKind { kOls, kLasso, kLogistic };

// A run description. Relative paths resolve against the manifest's
// directory. The hash covers the manifest bytes exactly as stored.
struct RunManifest {
  std::filesystem::path source;
  std::string text;
  std::string hash;

  std::filesystem::path model_path;
  std::uint64_t seed = 0;
  nlohmann::json scorer;  // {"kind": "synthetic" | "endpoint" | "replay", ...}
  int repeats = 1;
  int concurrency = 1;
  int max_retries = 2;
  ResponseKind response = ResponseKind::kDcpmi;
  nlohmann::json interaction_strata_spec;  // names or indices, as written
  std::vector<int> interaction_strata;     // resolved against the model
  int max_order = 1;
  FitKind fit_kind = FitKind::kOls;
  int fit_max_order = 1;
  double lambda = 0.0;
  std::string grid;
  SelectionConfig selection;
  int bins = 50;

  static RunManifest Load(const std::filesystem::path& path);
  static RunManifest Parse(std::string text, const std::filesystem::path& source);
};

// Command-line values that take precedence over the manifest. They do not
// alter the manifest hash.
struct RunOverrides {
  std::optional<std::filesystem::path> model;
  std::optional<std::string> scorer;
  std::optional<double> lambda;
  std::optional<std::string> grid;
  std::optional<int> max_order;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
};

// Diagnostics for a prompt-model file.
nlohmann::json DescribeModel(const PromptModel& model);

class Pipeline {
 public:
  Pipeline(RunManifest manifest, std::filesystem::path out_dir, RunOverrides overrides = {});

  const RunManifest& manifest() const { return manifest_; }
  const PromptModel& model() const { return model_; }
  const std::filesystem::path& out_dir() const { return out_; }

  // Every command returns a JSON summary of what it produced.
  nlohmann::json Validate();
  nlohmann::json Enumerate();
  nlohmann::json Score();
  nlohmann::json Design();
  nlohmann::json Fit();
  nlohmann::json Path();
  nlohmann::json Select();
  nlohmann::json Shapley();
  nlohmann::json Report();
  // enumerate, score, fit, path, select, shapley, report.
  nlohmann::json Run();
  nlohmann::json Execute(const std::string& command);

 private:
  void Prepare();
  std::unique_ptr<Scorer> MakeScorer() const;
  ScoreTable LoadScores() const;
  std::vector<TermDescriptor> Universe() const;
  std::vector<double> GridValues() const;

  RunManifest manifest_;
  std::filesystem::path out_;
  PromptModel model_;
  std::vector<Subprompt> subprompts_;
  std::string scorer_kind_;
  bool prepared_ = false;
};

}  // namespace iams
