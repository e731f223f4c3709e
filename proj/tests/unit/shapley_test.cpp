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

#include <map>
#include <random>
#include <sstream>

#include "iams/shapley.hpp"
#include "iams/stats.hpp"
#include "oracles/oracles.hpp"
#include "unit/test_util.hpp"

namespace iams {
namespace {

using testing::ExpectError;
using testing::MakeModel;

// Drops the trailing static query selection.
std::vector<int> VariablePart(const std::vector<int>& sel) {
  return {sel.begin(), sel.end() - 1};
}

CoalitionValue Lift(std::function<double(const std::vector<int>&)> v) {
  return [v](const std::vector<int>& sel) { return v(VariablePart(sel)); };
}

// A random game over stratified selections with pairwise interactions.
std::function<double(const std::vector<int>&)> RandomGame(const std::vector<int>& sizes,
                                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto table = std::make_shared<std::map<std::vector<int>, double>>();
  std::function<void(std::vector<int>&, std::size_t)> fill = [&](std::vector<int>& sel,
                                                                  std::size_t i) {
    if (i == sizes.size()) {
      (*table)[sel] = u(rng);
      return;
    }
    for (int c = -1; c < sizes[i]; ++c) {
      sel[i] = c;
      fill(sel, i + 1);
    }
  };
  std::vector<int> sel(sizes.size(), -1);
  fill(sel, 0);
  return [table](const std::vector<int>& v) { return table->at(v); };
}

const ShapleyEstimate& Find(const std::vector<ShapleyEstimate>& e, const std::string& id) {
  for (const auto& x : e) {
    if (x.component_id == id) return x;
  }
  throw std::runtime_error("no estimate for " + id);
}

TEST(ClassicShapley, TwoPlayerGame) {
  const std::vector<double> v = {0, 1, 2, 4};
  const auto phi = ClassicShapley([&](std::uint32_t mask) { return v[mask]; }, 2);
  EXPECT_NEAR(phi[0], 1.5, 1e-12);
  EXPECT_NEAR(phi[1], 2.5, 1e-12);
  const auto single = ClassicShapley([](std::uint32_t m) { return m ? 7.0 : 2.0; }, 1);
  EXPECT_DOUBLE_EQ(single[0], 5.0);
}

TEST(ShapleyValues, TwoPlayerGameWithSingletonStrata) {
  const PromptModel m = MakeModel({1, 1});
  const auto est = ShapleyValues(m, Lift([](const std::vector<int>& s) {
    const bool a = s[0] >= 0, b = s[1] >= 0;
    return a && b ? 4.0 : a ? 1.0 : b ? 2.0 : 0.0;
  }));
  ASSERT_EQ(est.size(), 2u);
  EXPECT_NEAR(est[0].phi, 1.5, 1e-12);
  EXPECT_NEAR(est[1].phi, 2.5, 1e-12);
  EXPECT_EQ(est[0].k, 1);
}

TEST(ShapleyValues, ReductionToClassicOnRandomGames) {
  for (int n = 1; n <= 8; ++n) {
    const PromptModel m = MakeModel(std::vector<int>(n, 1));
    std::mt19937_64 rng(100 + n);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> table(std::size_t{1} << n);
    for (double& x : table) x = u(rng);
    auto by_mask = [&](std::uint32_t mask) { return table[mask]; };
    const auto est = ShapleyValues(m, Lift([&](const std::vector<int>& s) {
      std::uint32_t mask = 0;
      for (int i = 0; i < n; ++i) mask |= (s[i] >= 0 ? 1u : 0u) << i;
      return table[mask];
    }));
    const auto classic = ClassicShapley(by_mask, n);
    const auto perm = oracle::PermutationShapley(by_mask, n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      EXPECT_NEAR(est[i].phi, perm[i], 1e-10) << n;
      EXPECT_NEAR(classic[i], perm[i], 1e-10) << n;
      sum += classic[i];
    }
    EXPECT_NEAR(sum, table.back() - table[0], 1e-10);
  }
}

TEST(ShapleyValues, MutualExclusivityMatchesBruteForce) {
  // Stratum 0 holds A and B, stratum 1 holds C.
  const std::vector<int> sizes = {2, 1};
  const PromptModel m = MakeModel(sizes);
  auto v = [](const std::vector<int>& s) {
    double out = 0.0;
    if (s[0] == 0) out += 1.0;
    if (s[0] == 1) out += 2.0;
    if (s[1] == 0) out += 0.5;
    if (s[0] == 0 && s[1] == 0) out += 3.0;
    return out;
  };
  const auto est = ShapleyValues(m, Lift(v));
  const auto& a = Find(est, "s0c0");
  EXPECT_EQ(a.k, 1);  // only C co-occurs with A
  EXPECT_EQ(a.coalitions_by_size, (std::vector<std::uint64_t>{1, 1}));
  // Coalitions {} and {C}: marginals 1 and 4.
  EXPECT_NEAR(a.phi, 2.5, 1e-12);
  EXPECT_NEAR(a.phi, oracle::StratifiedShapley(sizes, v, 0, 0), 1e-12);
  EXPECT_NEAR(Find(est, "s0c1").phi, oracle::StratifiedShapley(sizes, v, 0, 1), 1e-12);
  EXPECT_NEAR(Find(est, "s1c0").phi, oracle::StratifiedShapley(sizes, v, 1, 0), 1e-12);
  EXPECT_EQ(Find(est, "s1c0").k, 2);
}

TEST(ShapleyValues, RandomStratifiedGamesMatchBruteForce) {
  const std::vector<std::vector<int>> shapes = {{2, 3}, {3, 1, 2}, {2, 2, 2, 1}};
  for (std::size_t g = 0; g < shapes.size(); ++g) {
    const auto& sizes = shapes[g];
    const PromptModel m = MakeModel(sizes);
    const auto v = RandomGame(sizes, 40 + g);
    const auto est = ShapleyValues(m, Lift(v));
    for (const auto& e : est) {
      EXPECT_NEAR(e.phi, oracle::StratifiedShapley(sizes, v, e.stratum, e.position), 1e-10)
          << e.component_id;
    }
  }
}

TEST(ShapleyValues, AdditiveDummyAndLinearity) {
  const std::vector<int> sizes = {3, 2, 2};
  const PromptModel m = MakeModel(sizes);
  const std::vector<std::vector<double>> w = {{0.1, -0.2, 0.3}, {0.4, 0.0}, {-0.5, 0.25}};
  auto additive = [&](const std::vector<int>& s) {
    double out = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= 0) out += w[i][s[i]];
    }
    return out;
  };
  const auto est = ShapleyValues(m, Lift(additive));
  for (const auto& e : est) EXPECT_NEAR(e.phi, w[e.stratum][e.position], 1e-12);
  EXPECT_EQ(Find(est, "s1c1").phi, 0.0);  // dummy

  const auto v1 = RandomGame(sizes, 5), v2 = RandomGame(sizes, 6);
  const auto e1 = ShapleyValues(m, Lift(v1));
  const auto e2 = ShapleyValues(m, Lift(v2));
  const auto e12 =
      ShapleyValues(m, Lift([&](const std::vector<int>& s) { return v1(s) + v2(s); }));
  for (std::size_t i = 0; i < e1.size(); ++i) {
    EXPECT_NEAR(e12[i].phi, e1[i].phi + e2[i].phi, 1e-10);
  }
}

TEST(ShapleyValues, LiteralWeightingDiffersOnExclusiveStrata) {
  const std::vector<int> sizes = {2, 2};
  const PromptModel m = MakeModel(sizes);
  const auto v = RandomGame(sizes, 17);
  const auto normal = ShapleyValues(m, Lift(v));
  const auto literal = ShapleyValues(m, Lift(v), ShapleyWeighting::kLiteral);
  // Literal: (1/k) * sum over coalitions of C(k, |s|) * marginal, with k = 2.
  const auto& e = literal[0];
  double expected = 0.0;
  for (int other = -1; other < 2; ++other) {
    const double marginal = v({0, other}) - v({-1, other});
    expected += (other < 0 ? 1.0 : 2.0) * marginal;
  }
  EXPECT_NEAR(e.phi, expected / 2.0, 1e-12);
  EXPECT_NE(e.phi, normal[0].phi);
}

TEST(ShapleyValues, CapAndScoreTableLookup) {
  const PromptModel m = MakeModel({2, 2, 2});
  ExpectError(ErrorCode::kTooLarge,
              [&] { ShapleyValues(m, Lift([](const auto&) { return 0.0; }),
                                  ShapleyWeighting::kSizeStratified, 4); });
  std::map<std::string, double> scores;
  for (const auto& s : EnumerateSubprompts(m)) scores[s.key] = s.selections[1] == 1 ? 2.0 : 1.0;
  const auto est = ShapleyValues(m, ScoreTableValue(m, scores));
  EXPECT_NEAR(Find(est, "s1c1").phi, 1.0, 1e-12);
  EXPECT_NEAR(Find(est, "s0c0").phi, 0.0, 1e-12);
  scores.erase(scores.begin());
  ExpectError(ErrorCode::kMissingArtifact,
              [&] { ShapleyValues(m, ScoreTableValue(m, scores)); });
}

TEST(ShapleyVsFirstOrder, PerfectAndInverted) {
  const PromptModel m = MakeModel({2, 1});
  const std::vector<double> w = {0.2, -0.1, 0.4};
  auto v = [&](const std::vector<int>& s) {
    return (s[0] >= 0 ? w[s[0]] : 0.0) + (s[1] >= 0 ? w[2] : 0.0);
  };
  const auto est = ShapleyValues(m, Lift(v));
  FitResult fit;
  fit.labels = {"intercept", "s0c0", "s0c1", "s1c0"};
  fit.orders = {0, 1, 1, 1};
  fit.coefficients = {1.0, 0.2, -0.1, 0.4};
  EXPECT_NEAR(ShapleyVsFirstOrder(est, fit), 1.0, 1e-12);
  fit.coefficients = {1.0, -0.2, 0.1, -0.4};
  EXPECT_NEAR(ShapleyVsFirstOrder(est, fit), -1.0, 1e-12);
}

TEST(ShapleyExport, CsvAndJsonRoundTrip) {
  const std::vector<int> sizes = {2, 1};
  const PromptModel m = MakeModel(sizes);
  const auto est = ShapleyValues(m, Lift(RandomGame(sizes, 3)));
  std::ostringstream csv;
  WriteShapleyCsv(csv, est);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "component_id,stratum,phi,k_i");
  const auto back = ShapleyFromJson(nlohmann::json::parse(ShapleyToJson(est).dump()));
  ASSERT_EQ(back.size(), est.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    EXPECT_EQ(back[i].component_id, est[i].component_id);
    EXPECT_EQ(back[i].phi, est[i].phi);
    EXPECT_EQ(back[i].k, est[i].k);
    EXPECT_EQ(back[i].coalitions_by_size, est[i].coalitions_by_size);
    EXPECT_EQ(back[i].mean_marginal_by_size, est[i].mean_marginal_by_size);
  }
}

}  // namespace
}  // namespace iams
