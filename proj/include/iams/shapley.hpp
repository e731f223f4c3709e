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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "iams/prompt_model.hpp"
#include "iams/regression.hpp"
#include "json.hpp"

namespace iams {

// Value of a feasible coalition, given as per-stratum selections in the
// Subprompt convention (static strata select position 0, variable strata a
// component or kEmptySelection). Must be safe for concurrent calls.
using CoalitionValue = std::function<double(const std::vector<int>& selections)>;

struct ShapleyEstimate {
  std::string component_id;
  int stratum = 0;
  int position = 0;
  double phi = 0.0;
  // Components that can co-occur with this one: all variable components
  // outside its stratum.
  int k = 0;
  // Indexed by coalition size d = 0..k.
  std::vector<std::uint64_t> coalitions_by_size;
  std::vector<double> mean_marginal_by_size;
};

enum class ShapleyWeighting {
  // Mean marginal contribution per coalition size, averaged over the sizes
  // that admit at least one feasible coalition.
  kSizeStratified,
  // (1/k) * sum_s C(k, |s|) * marginal(s); kept for comparison only.
  kLiteral,
};

// Exact attribution for every variable-stratum component. A coalition never
// holds two components of one stratum. Throws Error(kTooLarge) when a
// component has more than `cap` feasible coalitions.
std::vector<ShapleyEstimate> ShapleyValues(
    const PromptModel& model, const CoalitionValue& value,
    ShapleyWeighting weighting = ShapleyWeighting::kSizeStratified,
    std::uint64_t cap = std::uint64_t{1} << 20);

// Looks coalitions up by subprompt key in a key -> score map.
CoalitionValue ScoreTableValue(const PromptModel& model,
                               std::map<std::string, double> scores);

// Textbook Shapley values over n unconstrained players (n <= 12), computed
// from the subset-weight formula. `value` receives a bitmask of players.
std::vector<double> ClassicShapley(const std::function<double(std::uint32_t)>& value, int n);

// Pearson correlation between phi and the first-order coefficient of the
// same component in `fit`.
double ShapleyVsFirstOrder(const std::vector<ShapleyEstimate>& estimates,
                           const FitResult& fit);

void WriteShapleyCsv(std::ostream& out, const std::vector<ShapleyEstimate>& estimates);
nlohmann::json ShapleyToJson(const std::vector<ShapleyEstimate>& estimates);
std::vector<ShapleyEstimate> ShapleyFromJson(const nlohmann::json& doc);

}  // namespace iams
