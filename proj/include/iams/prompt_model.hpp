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
#include <string_view>
#include <vector>

#include "json.hpp"

namespace iams {

enum class StratumKind { kStatic, kVariable };

struct PromptComponent {
  std::string id;
  int stratum_index = 0;
  std::string text;
  std::vector<std::string> tags;
};

struct PromptStratum {
  int index = 0;
  std::string name;
  StratumKind kind = StratumKind::kVariable;
  std::vector<PromptComponent> components;
};

// Unvalidated description of a model, as read from a model file.
struct ComponentSpec {
  std::string id;
  std::string text;
  std::vector<std::string> tags;
};

struct StratumSpec {
  std::string name;
  StratumKind kind = StratumKind::kVariable;
  std::vector<ComponentSpec> components;
};

struct PromptModelSpec {
  std::string separator = "\n";
  std::vector<StratumSpec> strata;
  int query_stratum = -1;
};

// Selection value for a variable stratum that contributes nothing.
inline constexpr int kEmptySelection = -1;

// One point of the subprompt space. selections[i] is a component position
// within stratum i, or kEmptySelection.
struct Subprompt {
  std::vector<int> selections;
  std::string key;
  std::string rendered;
};

// Locates a component by id.
struct ComponentRef {
  int stratum = 0;
  int position = 0;

  friend bool operator==(const ComponentRef&, const ComponentRef&) = default;
  friend auto operator<=>(const ComponentRef&, const ComponentRef&) = default;
};

inline constexpr std::uint64_t kDefaultSubpromptCap = std::uint64_t{1} << 20;

class PromptModel {
 public:
  // Validates the spec: at least one stratum, exactly one static query
  // stratum, unique non-empty ids, non-empty texts, static strata with one
  // component. Throws Error(kValidation) otherwise.
  static PromptModel Build(PromptModelSpec spec);

  // Parses the model file schema; unknown fields are rejected.
  static PromptModel FromJson(const nlohmann::json& doc);
  static PromptModel FromFile(const std::filesystem::path& path);
  nlohmann::json ToJson() const;

  const std::vector<PromptStratum>& strata() const { return strata_; }
  const PromptStratum& stratum(int index) const { return strata_.at(index); }
  int num_strata() const { return static_cast<int>(strata_.size()); }
  int query_stratum() const { return query_stratum_; }
  const std::string& separator() const { return separator_; }
  const std::string& query_text() const {
    return strata_[query_stratum_].components.front().text;
  }

  std::vector<int> variable_strata() const;
  bool is_variable(int stratum) const;

  // Number of components across all variable strata.
  int num_variable_components() const;

  std::optional<ComponentRef> find(std::string_view id) const;
  const PromptComponent& component(ComponentRef ref) const;

  // Product of (n_i + 1) over variable strata, saturating at UINT64_MAX.
  std::uint64_t subprompt_count() const;

 private:
  std::vector<PromptStratum> strata_;
  int query_stratum_ = 0;
  std::string separator_ = "\n";
};

// Every subprompt in odometer order: stratum 0 varies slowest, the empty
// choice precedes the components of a stratum. The query-only subprompt is
// first. Throws Error(kTooLarge) when the count exceeds `cap`.
std::vector<Subprompt> EnumerateSubprompts(
    const PromptModel& model, std::uint64_t cap = kDefaultSubpromptCap);

// Builds a Subprompt (key and rendered text) from per-stratum selections.
Subprompt MakeSubprompt(const PromptModel& model, std::vector<int> selections);

// Joins the selected texts in stratum order, skipping empty selections.
std::string RenderSubprompt(const Subprompt& sub, const PromptModel& model,
                            std::string_view separator);
inline std::string RenderSubprompt(const Subprompt& sub,
                                   const PromptModel& model) {
  return RenderSubprompt(sub, model, model.separator());
}

// Key format: one token per stratum joined by '|'; a token is a component
// id or "-" for an empty selection.
std::string SubpromptKey(const PromptModel& model,
                         const std::vector<int>& selections);
std::vector<int> ParseSubpromptKey(const PromptModel& model,
                                   std::string_view key);

}  // namespace iams
