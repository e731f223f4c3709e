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
#include <span>
#include <string>
#include <vector>

#include "iams/prompt_model.hpp"
#include "json.hpp"

namespace iams {

struct TermMember {
  int stratum = 0;
  int position = 0;
  std::string component_id;

  friend bool operator==(const TermMember& a, const TermMember& b) {
    return a.stratum == b.stratum && a.position == b.position;
  }
};

// A first-order indicator (order 1) or an interaction of components from
// distinct strata. Order 0 denotes the intercept column.
struct TermDescriptor {
  int order = 0;
  std::vector<TermMember> members;  // sorted by stratum
  std::string label;

  bool is_intercept() const { return order == 0; }
  // True when every member is selected in `selections`.
  bool active(const std::vector<int>& selections) const;
};

inline constexpr const char* kInterceptLabel = "intercept";

TermDescriptor InterceptTerm();
// Label is the member ids joined by ':'.
TermDescriptor MakeTerm(const PromptModel& model, std::vector<ComponentRef> refs);
// Resolves a label such as "a:b" back to a term. Throws on unknown ids or
// two members sharing a stratum.
TermDescriptor ParseTermLabel(const PromptModel& model, std::string_view label);

// First-order terms for every variable-stratum component, then interactions
// of order 2..max_order whose members come from distinct strata in
// `interaction_strata`. Interactions are ordered by order, then member tuple.
std::vector<TermDescriptor> TermUniverse(const PromptModel& model,
                                         std::vector<int> interaction_strata,
                                         int max_order);

// Binary design with an intercept column at index 0. Storage is column-major.
class DesignMatrix {
 public:
  DesignMatrix() = default;
  DesignMatrix(std::size_t rows, std::vector<TermDescriptor> column_terms,
               std::vector<std::string> row_keys);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return terms_.size(); }
  const std::vector<TermDescriptor>& column_terms() const { return terms_; }
  const std::vector<std::string>& row_keys() const { return row_keys_; }
  std::vector<std::string> labels() const;
  std::vector<int> orders() const;

  std::uint8_t at(std::size_t row, std::size_t col) const {
    return data_[col * rows_ + row];
  }
  void set(std::size_t row, std::size_t col, std::uint8_t v) {
    data_[col * rows_ + row] = v;
  }
  std::span<const std::uint8_t> column(std::size_t col) const {
    return {data_.data() + col * rows_, rows_};
  }

  // Keeps the given columns in order. Column 0 must be retained first.
  DesignMatrix SelectColumns(std::span<const std::size_t> columns) const;
  std::size_t column_index(std::string_view label) const;  // throws if absent

  void WriteCsv(std::ostream& out) const;
  nlohmann::json ColumnManifest() const;

 private:
  std::size_t rows_ = 0;
  std::vector<TermDescriptor> terms_;
  std::vector<std::string> row_keys_;
  std::vector<std::uint8_t> data_;
};

// One row per (subprompt, repeat), subprompt-major; repeats stack identical
// rows. The intercept column is prepended to `terms`.
DesignMatrix BuildDesignMatrix(const PromptModel& model,
                               const std::vector<Subprompt>& subprompts,
                               const std::vector<TermDescriptor>& terms,
                               int repeats = 1);

}  // namespace iams
