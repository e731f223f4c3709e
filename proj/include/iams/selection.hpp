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

#include <span>
#include <string>
#include <vector>

#include "iams/encoding.hpp"
#include "iams/regression.hpp"
#include "json.hpp"

namespace iams {

enum class LevelPolicy { kPerLevelBonferroni, kGlobalBonferroni };

// kGreedy admits the single smallest-p qualifying candidate per step and
// refits; kJoint fits all level candidates at once and keeps those below
// the threshold.
enum class SelectionMode { kGreedy, kJoint };

struct SelectionConfig {
  double alpha = 0.05;
  int max_level = 1;
  std::vector<int> interaction_strata;
  LevelPolicy policy = LevelPolicy::kPerLevelBonferroni;
  SelectionMode mode = SelectionMode::kGreedy;

  void Validate() const;
  static SelectionConfig FromJson(const nlohmann::json& doc);
};

struct SelectionStep {
  int step = 0;  // greedy iteration counter, shared across levels
  int level = 0;
  std::string term;
  double p_value = 1.0;
  double threshold = 0.0;
  bool admitted = false;
  std::string note;  // e.g. "rank_deficient" for a skipped candidate

  nlohmann::json ToJson() const;
};

struct SelectionTrace {
  std::vector<SelectionStep> log;
  std::vector<std::string> included;  // admitted term labels, admission order
  FitResult final_fit;                // OLS refit on intercept + included
};

// Hierarchical forward selection over the columns of `universe`. Level 1
// screens first-order terms against alpha / m_1. Level g >= 2 considers
// order-g terms over the interaction strata whose order-(g-1) sub-terms are
// all included, against alpha / m_g.
SelectionTrace ForwardSelect(const DesignMatrix& universe, std::span<const double> y,
                             const SelectionConfig& config);

// True when every included order-g term (g >= 2) has all of its
// order-(g-1) sub-terms included.
bool SatisfiesHierarchy(const std::vector<TermDescriptor>& included);

}  // namespace iams
