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

#include "iams/encoding.hpp"

#include <algorithm>
#include <ostream>
#include <set>

#include "iams/csv.hpp"
#include "iams/error.hpp"

namespace iams {

bool TermDescriptor::active(const std::vector<int>& selections) const {
  for (const auto& m : members) {
    if (selections[m.stratum] != m.position) return false;
  }
  return true;
}

TermDescriptor InterceptTerm() {
  return TermDescriptor{0, {}, kInterceptLabel};
}

TermDescriptor MakeTerm(const PromptModel& model, std::vector<ComponentRef> refs) {
  if (refs.empty()) Fail(ErrorCode::kInvalidArgument, "term needs at least one member");
  std::sort(refs.begin(), refs.end());
  TermDescriptor term;
  term.order = static_cast<int>(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (i && refs[i].stratum == refs[i - 1].stratum) {
      Fail(ErrorCode::kValidation,
           "term members share stratum " + std::to_string(refs[i].stratum));
    }
    if (!model.is_variable(refs[i].stratum)) {
      Fail(ErrorCode::kValidation, "term member in non-variable stratum " +
                                       std::to_string(refs[i].stratum));
    }
    const auto& c = model.component(refs[i]);
    term.members.push_back({refs[i].stratum, refs[i].position, c.id});
    if (i) term.label += ':';
    term.label += c.id;
  }
  return term;
}

TermDescriptor ParseTermLabel(const PromptModel& model, std::string_view label) {
  if (label == kInterceptLabel) return InterceptTerm();
  std::vector<ComponentRef> refs;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = label.find(':', start);
    const std::string_view id = label.substr(start, end - start);
    auto ref = model.find(id);
    if (!ref) {
      Fail(ErrorCode::kValidation, "term '" + std::string(label) +
                                       "' references unknown component '" +
                                       std::string(id) + "'");
    }
    refs.push_back(*ref);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return MakeTerm(model, std::move(refs));
}

namespace {

// Calls fn for every size-k subset of `items` in lexicographic order.
template <typename Fn>
void ForEachCombination(const std::vector<int>& items, int k, Fn&& fn) {
  const int n = static_cast<int>(items.size());
  if (k > n) return;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  std::vector<int> chosen(k);
  while (true) {
    for (int i = 0; i < k; ++i) chosen[i] = items[idx[i]];
    fn(chosen);
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace

std::vector<TermDescriptor> TermUniverse(const PromptModel& model,
                                         std::vector<int> interaction_strata,
                                         int max_order) {
  if (max_order < 1) {
    Fail(ErrorCode::kInvalidArgument, "max_order must be at least 1");
  }
  std::sort(interaction_strata.begin(), interaction_strata.end());
  interaction_strata.erase(
      std::unique(interaction_strata.begin(), interaction_strata.end()),
      interaction_strata.end());
  for (int s : interaction_strata) {
    if (!model.is_variable(s)) {
      Fail(ErrorCode::kInvalidArgument,
           "interaction stratum " + std::to_string(s) + " is not a variable stratum");
    }
  }
  if (max_order > 1 && max_order > static_cast<int>(interaction_strata.size())) {
    Fail(ErrorCode::kInvalidArgument,
         "max_order " + std::to_string(max_order) + " exceeds the " +
             std::to_string(interaction_strata.size()) + " interaction strata");
  }

  std::vector<TermDescriptor> terms;
  for (int s : model.variable_strata()) {
    const int n = static_cast<int>(model.stratum(s).components.size());
    for (int j = 0; j < n; ++j) terms.push_back(MakeTerm(model, {{s, j}}));
  }
  for (int order = 2; order <= max_order; ++order) {
    std::vector<std::vector<ComponentRef>> tuples;
    ForEachCombination(interaction_strata, order, [&](const std::vector<int>& strata) {
      std::vector<int> pos(order, 0);
      while (true) {
        std::vector<ComponentRef> refs(order);
        for (int i = 0; i < order; ++i) refs[i] = {strata[i], pos[i]};
        tuples.push_back(std::move(refs));
        int i = order - 1;
        for (; i >= 0; --i) {
          if (++pos[i] < static_cast<int>(model.stratum(strata[i]).components.size())) break;
          pos[i] = 0;
        }
        if (i < 0) break;
      }
    });
    std::sort(tuples.begin(), tuples.end());
    for (auto& t : tuples) terms.push_back(MakeTerm(model, std::move(t)));
  }
  return terms;
}

DesignMatrix::DesignMatrix(std::size_t rows, std::vector<TermDescriptor> column_terms,
                           std::vector<std::string> row_keys)
    : rows_(rows),
      terms_(std::move(column_terms)),
      row_keys_(std::move(row_keys)),
      data_(rows_ * terms_.size(), 0) {
  if (row_keys_.size() != rows_) {
    Fail(ErrorCode::kInternal, "row key count does not match row count");
  }
}

std::vector<std::string> DesignMatrix::labels() const {
  std::vector<std::string> out;
  for (const auto& t : terms_) out.push_back(t.label);
  return out;
}

std::vector<int> DesignMatrix::orders() const {
  std::vector<int> out;
  for (const auto& t : terms_) out.push_back(t.order);
  return out;
}

DesignMatrix DesignMatrix::SelectColumns(std::span<const std::size_t> columns) const {
  if (columns.empty() || columns.front() != 0) {
    Fail(ErrorCode::kInvalidArgument, "column selection must start with the intercept");
  }
  std::vector<TermDescriptor> terms;
  for (std::size_t c : columns) terms.push_back(terms_.at(c));
  DesignMatrix out(rows_, std::move(terms), row_keys_);
  for (std::size_t i = 0; i < columns.size(); ++i) {
    std::copy_n(data_.begin() + columns[i] * rows_, rows_, out.data_.begin() + i * rows_);
  }
  return out;
}

std::size_t DesignMatrix::column_index(std::string_view label) const {
  for (std::size_t c = 0; c < terms_.size(); ++c) {
    if (terms_[c].label == label) return c;
  }
  Fail(ErrorCode::kValidation, "design has no column '" + std::string(label) + "'");
}

void DesignMatrix::WriteCsv(std::ostream& out) const {
  std::vector<std::string> header{"subprompt_key"};
  for (const auto& t : terms_) header.push_back(t.label);
  csv::WriteRow(out, header);
  std::vector<std::string> row(terms_.size() + 1);
  for (std::size_t r = 0; r < rows_; ++r) {
    row[0] = row_keys_[r];
    for (std::size_t c = 0; c < terms_.size(); ++c) row[c + 1] = at(r, c) ? "1" : "0";
    csv::WriteRow(out, row);
  }
}

nlohmann::json DesignMatrix::ColumnManifest() const {
  nlohmann::json cols = nlohmann::json::array();
  for (std::size_t c = 0; c < terms_.size(); ++c) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : terms_[c].members) {
      members.push_back({{"stratum", m.stratum}, {"component_id", m.component_id}});
    }
    cols.push_back({{"index", c},
                    {"label", terms_[c].label},
                    {"order", terms_[c].order},
                    {"members", std::move(members)}});
  }
  return {{"rows", rows_}, {"columns", std::move(cols)}};
}

DesignMatrix BuildDesignMatrix(const PromptModel& model,
                               const std::vector<Subprompt>& subprompts,
                               const std::vector<TermDescriptor>& terms,
                               int repeats) {
  if (repeats < 1) Fail(ErrorCode::kInvalidArgument, "repeats must be at least 1");
  for (const auto& t : terms) {
    if (t.is_intercept()) {
      Fail(ErrorCode::kInvalidArgument, "intercept is added implicitly");
    }
    for (const auto& m : t.members) {
      if (m.stratum < 0 || m.stratum >= model.num_strata() ||
          m.position < 0 ||
          m.position >= static_cast<int>(model.stratum(m.stratum).components.size()) ||
          model.stratum(m.stratum).components[m.position].id != m.component_id) {
        Fail(ErrorCode::kValidation, "term '" + t.label +
                                         "' references unknown component '" +
                                         m.component_id + "'");
      }
    }
  }
  std::vector<TermDescriptor> columns;
  columns.reserve(terms.size() + 1);
  columns.push_back(InterceptTerm());
  columns.insert(columns.end(), terms.begin(), terms.end());

  std::vector<std::string> keys;
  keys.reserve(subprompts.size() * repeats);
  for (const auto& s : subprompts) {
    for (int r = 0; r < repeats; ++r) keys.push_back(s.key);
  }
  const std::size_t rows = keys.size();
  DesignMatrix design(rows, std::move(columns), std::move(keys));
  std::size_t row = 0;
  for (const auto& s : subprompts) {
    if (static_cast<int>(s.selections.size()) != model.num_strata()) {
      Fail(ErrorCode::kValidation, "subprompt '" + s.key + "' does not match the model");
    }
    for (int r = 0; r < repeats; ++r, ++row) {
      design.set(row, 0, 1);
      for (std::size_t c = 0; c < terms.size(); ++c) {
        if (terms[c].active(s.selections)) design.set(row, c + 1, 1);
      }
    }
  }
  return design;
}

}  // namespace iams
