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

#include <numeric>
#include <sstream>

#include "iams/csv.hpp"
#include "iams/encoding.hpp"
#include "unit/test_util.hpp"

namespace iams {
namespace {

using testing::ExpectError;
using testing::MakeModel;

std::vector<int> CountByOrder(const std::vector<TermDescriptor>& terms) {
  std::vector<int> counts(8, 0);
  for (const auto& t : terms) ++counts[t.order];
  return counts;
}

TEST(TermUniverse, PaperDesignHas393Columns) {
  const PromptModel m = PromptModel::FromFile(testing::DataFile("arithmetic_model.json"));
  const std::vector<int> examples = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto terms = TermUniverse(m, examples, 4);
  const auto counts = CountByOrder(terms);
  EXPECT_EQ(counts[1], 17);
  EXPECT_EQ(counts[2], 45);
  EXPECT_EQ(counts[3], 120);
  EXPECT_EQ(counts[4], 210);
  EXPECT_EQ(terms.size() + 1, 393u);
}

TEST(TermUniverse, FirstOrderOnly) {
  const PromptModel m = MakeModel({3, 2, 1});
  const auto terms = TermUniverse(m, {}, 1);
  ASSERT_EQ(terms.size(), 6u);
  for (const auto& t : terms) EXPECT_EQ(t.order, 1);
  EXPECT_EQ(terms[0].label, "s0c0");
  EXPECT_EQ(terms[5].label, "s2c0");
}

TEST(TermUniverse, HandEnumeratedPairs) {
  const PromptModel m = MakeModel({2, 1, 1});
  const auto terms = TermUniverse(m, {0, 1, 2}, 2);
  const auto counts = CountByOrder(terms);
  EXPECT_EQ(counts[1], 4);
  EXPECT_EQ(counts[2], 5);
  std::vector<std::string> pairs;
  for (const auto& t : terms) {
    if (t.order == 2) pairs.push_back(t.label);
  }
  EXPECT_EQ(pairs, (std::vector<std::string>{"s0c0:s1c0", "s0c0:s2c0", "s0c1:s1c0",
                                             "s0c1:s2c0", "s1c0:s2c0"}));
}

TEST(TermUniverse, Errors) {
  const PromptModel m = MakeModel({2, 1, 1});
  ExpectError(ErrorCode::kInvalidArgument, [&] { TermUniverse(m, {0, 1}, 3); });
  ExpectError(ErrorCode::kInvalidArgument, [&] { TermUniverse(m, {0, 3}, 2); });
  ExpectError(ErrorCode::kInvalidArgument, [&] { TermUniverse(m, {0, 1}, 0); });
}

TEST(Terms, LabelsRoundTripAndRejectSameStratum) {
  const PromptModel m = MakeModel({2, 1, 1});
  const TermDescriptor t = ParseTermLabel(m, "s2c0:s0c1");
  EXPECT_EQ(t.order, 2);
  EXPECT_EQ(t.label, "s0c1:s2c0");
  ExpectError(ErrorCode::kValidation, [&] { ParseTermLabel(m, "s0c0:s0c1"); });
  ExpectError(ErrorCode::kValidation, [&] { ParseTermLabel(m, "zzz"); });
  ExpectError(ErrorCode::kValidation, [&] { ParseTermLabel(m, "query"); });
}

TEST(DesignMatrix, QueryOnlyRowIsInterceptOnly) {
  const PromptModel m = MakeModel({2, 1, 1});
  const auto subs = EnumerateSubprompts(m);
  const DesignMatrix d = BuildDesignMatrix(m, subs, TermUniverse(m, {0, 1, 2}, 3));
  ASSERT_EQ(d.rows(), subs.size());
  EXPECT_EQ(d.at(0, 0), 1);
  for (std::size_t c = 1; c < d.cols(); ++c) EXPECT_EQ(d.at(0, c), 0);
}

TEST(DesignMatrix, FigureOneEncoding) {
  const PromptModel m = PromptModel::FromFile(testing::DataFile("arithmetic_model.json"));
  const auto terms = TermUniverse(m, {}, 1);
  std::vector<int> sel(12, kEmptySelection);
  sel[11] = 0;
  sel[0] = 1;  // math_expert
  sel[2] = 0;  // 1+1=2
  sel[4] = 0;  // 2+3=5
  const Subprompt s = MakeSubprompt(m, sel);
  const DesignMatrix d = BuildDesignMatrix(m, {s}, terms);
  std::vector<std::string> on;
  for (std::size_t c = 1; c < d.cols(); ++c) {
    if (d.at(0, c)) on.push_back(d.column_terms()[c].label);
  }
  EXPECT_EQ(on, (std::vector<std::string>{"math_expert", "1+1=2", "2+3=5"}));
}

TEST(DesignMatrix, StructuralInvariants) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> sizes;
    const int strata = std::uniform_int_distribution<int>(2, 5)(rng);
    for (int i = 0; i < strata; ++i) sizes.push_back(std::uniform_int_distribution<int>(1, 3)(rng));
    const PromptModel m = MakeModel(sizes);
    std::vector<int> all(strata);
    std::iota(all.begin(), all.end(), 0);
    const int order = std::min(strata, 3);
    const auto subs = EnumerateSubprompts(m);
    const auto terms = TermUniverse(m, all, order);
    const DesignMatrix d = BuildDesignMatrix(m, subs, terms);
    ASSERT_EQ(d.cols(), terms.size() + 1);
    // Interaction columns are the AND of their first-order columns.
    for (std::size_t c = 1; c < d.cols(); ++c) {
      const auto& t = d.column_terms()[c];
      if (t.order < 2) continue;
      std::vector<std::size_t> parts;
      for (const auto& mem : t.members) parts.push_back(d.column_index(mem.component_id));
      for (std::size_t r = 0; r < d.rows(); ++r) {
        std::uint8_t v = 1;
        for (auto p : parts) v &= d.at(r, p);
        ASSERT_EQ(d.at(r, c), v);
      }
    }
    // Same-stratum columns are mutually exclusive; column counts match.
    std::uint64_t total = 1;
    for (int n : sizes) total *= n + 1;
    for (int s = 0; s < strata; ++s) {
      for (std::size_t r = 0; r < d.rows(); ++r) {
        int sum = 0;
        for (int j = 0; j < sizes[s]; ++j) {
          sum += d.at(r, d.column_index("s" + std::to_string(s) + "c" + std::to_string(j)));
        }
        ASSERT_LE(sum, 1);
      }
      for (int j = 0; j < sizes[s]; ++j) {
        const auto col = d.column(d.column_index("s" + std::to_string(s) + "c" + std::to_string(j)));
        const auto ones = std::count(col.begin(), col.end(), 1);
        EXPECT_EQ(static_cast<std::uint64_t>(ones), total / (sizes[s] + 1));
      }
    }
    // Rebuilding from first-order columns reproduces the matrix.
    const DesignMatrix first = BuildDesignMatrix(m, subs, TermUniverse(m, all, 1));
    for (std::size_t c = 1; c < d.cols(); ++c) {
      const auto& t = d.column_terms()[c];
      for (std::size_t r = 0; r < d.rows(); ++r) {
        std::uint8_t v = 1;
        for (const auto& mem : t.members) v &= first.at(r, first.column_index(mem.component_id));
        ASSERT_EQ(v, d.at(r, c));
      }
    }
  }
}

TEST(DesignMatrix, RepeatsStackRows) {
  const PromptModel m = MakeModel({2, 1});
  const auto subs = EnumerateSubprompts(m);
  const DesignMatrix d = BuildDesignMatrix(m, subs, TermUniverse(m, {}, 1), 3);
  ASSERT_EQ(d.rows(), 18u);
  for (std::size_t k = 0; k < subs.size(); ++k) {
    for (int r = 0; r < 3; ++r) {
      EXPECT_EQ(d.row_keys()[k * 3 + r], subs[k].key);
      for (std::size_t c = 0; c < d.cols(); ++c) EXPECT_EQ(d.at(k * 3 + r, c), d.at(k * 3, c));
    }
  }
  ExpectError(ErrorCode::kInvalidArgument, [&] { BuildDesignMatrix(m, subs, {}, 0); });
}

TEST(DesignMatrix, UnknownComponentRejected) {
  const PromptModel a = MakeModel({2, 1});
  const PromptModel b = MakeModel({1, 1});
  const auto foreign = TermUniverse(a, {}, 1);
  ExpectError(ErrorCode::kValidation,
              [&] { BuildDesignMatrix(b, EnumerateSubprompts(b), foreign); });
}

TEST(DesignMatrix, CsvAndManifest) {
  const PromptModel m = MakeModel({1, 1});
  const DesignMatrix d =
      BuildDesignMatrix(m, EnumerateSubprompts(m), TermUniverse(m, {0, 1}, 2));
  std::stringstream ss;
  d.WriteCsv(ss);
  const csv::Table t = csv::Read(ss);
  EXPECT_EQ(t.header, (std::vector<std::string>{"subprompt_key", "intercept", "s0c0", "s1c0",
                                                "s0c0:s1c0"}));
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_EQ(t.rows[3], (std::vector<std::string>{"s0c0|s1c0|query", "1", "1", "1", "1"}));
  const auto doc = d.ColumnManifest();
  EXPECT_EQ(doc["rows"], 4);
  const auto& manifest = doc["columns"];
  ASSERT_EQ(manifest.size(), 4u);
  EXPECT_EQ(manifest[3]["label"], "s0c0:s1c0");
  EXPECT_EQ(manifest[3]["order"], 2);
}

TEST(DesignMatrix, SelectColumnsKeepsIntercept) {
  const PromptModel m = MakeModel({1, 1});
  const DesignMatrix d =
      BuildDesignMatrix(m, EnumerateSubprompts(m), TermUniverse(m, {0, 1}, 2));
  const std::vector<std::size_t> keep = {0, 3};
  const DesignMatrix s = d.SelectColumns(keep);
  EXPECT_EQ(s.labels(), (std::vector<std::string>{"intercept", "s0c0:s1c0"}));
  const std::vector<std::size_t> bad = {1, 3};
  ExpectError(ErrorCode::kInvalidArgument, [&] { d.SelectColumns(bad); });
}

}  // namespace
}  // namespace iams
