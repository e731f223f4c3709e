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
#include <set>

#include "iams/selection.hpp"
#include "unit/test_util.hpp"

namespace iams {
namespace {

using testing::ExpectError;
using testing::MakeModel;

struct Problem {
  PromptModel model;
  std::vector<Subprompt> subs;
  DesignMatrix universe;
  std::vector<double> y;
};

// y = 1 + sum of weighted term indicators + N(0, sd^2).
Problem MakeProblem(const std::vector<int>& sizes, const std::map<std::string, double>& weights,
                    double sd, int max_order, std::uint64_t seed = 7) {
  Problem p{MakeModel(sizes), {}, {}, {}};
  p.subs = EnumerateSubprompts(p.model);
  p.universe = BuildDesignMatrix(p.model, p.subs,
                                 TermUniverse(p.model, p.model.variable_strata(), max_order));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sd);
  for (std::size_t r = 0; r < p.subs.size(); ++r) {
    double v = 1.0 + noise(rng);
    for (const auto& [label, w] : weights) {
      if (ParseTermLabel(p.model, label).active(p.subs[r].selections)) v += w;
    }
    p.y.push_back(v);
  }
  return p;
}

SelectionConfig Config(const PromptModel& m, int max_level) {
  SelectionConfig c;
  c.max_level = max_level;
  c.interaction_strata = m.variable_strata();
  return c;
}

TEST(ForwardSelect, StrongFirstOrderSignalOnly) {
  const Problem p = MakeProblem({3, 2, 2}, {{"s0c1", 0.5}, {"s2c0", -0.3}}, 0.01, 1);
  const auto trace = ForwardSelect(p.universe, p.y, Config(p.model, 1));
  EXPECT_EQ(std::set<std::string>(trace.included.begin(), trace.included.end()),
            (std::set<std::string>{"s0c1", "s2c0"}));
  EXPECT_EQ(trace.included.front(), "s0c1");  // larger effect, smaller p
  EXPECT_EQ(trace.final_fit.labels,
            (std::vector<std::string>{"intercept", "s0c1", "s2c0"}));
  EXPECT_NEAR(trace.final_fit.coefficients[1], 0.5, 0.01);
  for (const auto& s : trace.log) EXPECT_DOUBLE_EQ(s.threshold, 0.05 / 7);
}

TEST(ForwardSelect, InteractionFollowsParents) {
  const Problem p = MakeProblem({2, 2, 2},
                                {{"s0c0", 0.3}, {"s1c1", 0.2}, {"s0c0:s1c1", 0.4}}, 0.01, 3);
  const auto trace = ForwardSelect(p.universe, p.y, Config(p.model, 3));
  const std::set<std::string> got(trace.included.begin(), trace.included.end());
  EXPECT_TRUE(got.count("s0c0:s1c1"));
  std::vector<TermDescriptor> terms;
  for (const auto& l : trace.included) terms.push_back(ParseTermLabel(p.model, l));
  EXPECT_TRUE(SatisfiesHierarchy(terms));
  // Every screened interaction had all of its sub-terms admitted earlier.
  std::set<std::string> admitted;
  for (const auto& s : trace.log) {
    if (s.level >= 2) {
      const auto t = ParseTermLabel(p.model, s.term);
      for (std::size_t drop = 0; drop < t.members.size(); ++drop) {
        std::string sub;
        for (std::size_t i = 0; i < t.members.size(); ++i) {
          if (i == drop) continue;
          sub += (sub.empty() ? "" : ":") + t.members[i].component_id;
        }
        EXPECT_TRUE(admitted.count(sub)) << s.term << " screened before " << sub;
      }
    }
    if (s.admitted) admitted.insert(s.term);
  }
}

TEST(ForwardSelect, InteractionStrataRestrictScreening) {
  const Problem p = MakeProblem({2, 2, 2},
                                {{"s0c0", 0.3}, {"s2c1", 0.2}, {"s0c0:s2c1", 0.4}}, 0.01, 2);
  SelectionConfig c = Config(p.model, 2);
  c.interaction_strata = {0, 1};
  const auto trace = ForwardSelect(p.universe, p.y, c);
  for (const auto& s : trace.log) {
    if (s.level == 2) EXPECT_EQ(s.term.find("s2"), std::string::npos) << s.term;
  }
}

TEST(ForwardSelect, DeterministicAndOrdered) {
  const Problem p = MakeProblem({3, 3, 2}, {{"s0c0", 0.1}, {"s1c2", 0.1}, {"s0c0:s1c2", 0.05}},
                                0.05, 2);
  const auto a = ForwardSelect(p.universe, p.y, Config(p.model, 2));
  const auto b = ForwardSelect(p.universe, p.y, Config(p.model, 2));
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].ToJson().dump(), b.log[i].ToJson().dump());
  }
  int step = 0, level = 0;
  for (const auto& s : a.log) {
    EXPECT_GE(s.step, step);
    EXPECT_GE(s.level, level);
    step = s.step;
    level = s.level;
  }
  EXPECT_EQ(a.included, b.included);
}

TEST(ForwardSelect, NullResponseAdmitsNothing) {
  const Problem p = MakeProblem({3, 2, 2}, {}, 0.1, 1, 11);
  const auto trace = ForwardSelect(p.universe, p.y, Config(p.model, 1));
  EXPECT_TRUE(trace.included.empty());
  EXPECT_EQ(trace.final_fit.labels, (std::vector<std::string>{"intercept"}));
}

TEST(ForwardSelect, GlobalPolicyAndJointMode) {
  const Problem p = MakeProblem({2, 2, 2}, {{"s0c1", 0.5}, {"s1c0", 0.4}}, 0.01, 2);
  SelectionConfig c = Config(p.model, 2);
  c.policy = LevelPolicy::kGlobalBonferroni;
  const auto global = ForwardSelect(p.universe, p.y, c);
  for (const auto& s : global.log) EXPECT_DOUBLE_EQ(s.threshold, 0.05 / (6 + 12));
  c.policy = LevelPolicy::kPerLevelBonferroni;
  c.mode = SelectionMode::kJoint;
  const auto joint = ForwardSelect(p.universe, p.y, c);
  const std::set<std::string> got(joint.included.begin(), joint.included.end());
  EXPECT_TRUE(got.count("s0c1"));
  EXPECT_TRUE(got.count("s1c0"));
}

TEST(SelectionConfig, ValidationAndParsing) {
  SelectionConfig c;
  c.alpha = 0.0;
  ExpectError(ErrorCode::kInvalidArgument, [&] { c.Validate(); });
  c.alpha = 0.05;
  c.max_level = 3;
  c.interaction_strata = {0, 1};
  ExpectError(ErrorCode::kInvalidArgument, [&] { c.Validate(); }, "max_level");
  const auto parsed = SelectionConfig::FromJson(
      {{"alpha", 0.01}, {"max_level", 2}, {"policy", "global_bonferroni"}, {"mode", "joint"}});
  EXPECT_EQ(parsed.alpha, 0.01);
  EXPECT_EQ(parsed.policy, LevelPolicy::kGlobalBonferroni);
  EXPECT_EQ(parsed.mode, SelectionMode::kJoint);
  ExpectError(ErrorCode::kValidation, [] { SelectionConfig::FromJson({{"alfa", 0.1}}); },
              "alfa");
  ExpectError(ErrorCode::kValidation,
              [] { SelectionConfig::FromJson({{"policy", "holm"}}); }, "holm");
}

TEST(SatisfiesHierarchy, Cases) {
  const PromptModel m = MakeModel({2, 2, 2});
  auto t = [&](const char* l) { return ParseTermLabel(m, l); };
  EXPECT_TRUE(SatisfiesHierarchy({t("s0c0"), t("s1c0"), t("s0c0:s1c0")}));
  EXPECT_FALSE(SatisfiesHierarchy({t("s0c0"), t("s0c0:s1c0")}));
  EXPECT_FALSE(SatisfiesHierarchy(
      {t("s0c0"), t("s1c0"), t("s2c0"), t("s0c0:s1c0"), t("s0c0:s1c0:s2c0")}));
  EXPECT_TRUE(SatisfiesHierarchy({t("s0c0"), t("s1c0"), t("s2c0"), t("s0c0:s1c0"),
                                  t("s0c0:s2c0"), t("s1c0:s2c0"), t("s0c0:s1c0:s2c0")}));
  EXPECT_TRUE(SatisfiesHierarchy({}));
}

}  // namespace
}  // namespace iams
