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

#include "iams/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "iams/error.hpp"
#include "iams/stats.hpp"

namespace iams {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

using MemberKey = std::vector<std::pair<int, int>>;

MemberKey KeyOf(const TermDescriptor& t) {
  MemberKey k;
  for (const auto& m : t.members) k.emplace_back(m.stratum, m.position);
  return k;
}

// Normal-equation fits on column subsets of a fixed design, with y centered
// so the intercept absorbs its mean.
class SubsetOls {
 public:
  SubsetOls(const MatrixXd& x, std::span<const double> y) : n_(x.rows()) {
    VectorXd yc = Eigen::Map<const VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    yc.array() -= yc.mean();
    gram_.noalias() = x.transpose() * x;
    xty_.noalias() = x.transpose() * yc;
    yty_ = yc.squaredNorm();
  }

  struct Result {
    bool ok = false;
    VectorXd beta;
    VectorXd p_values;
  };

  Result Fit(const std::vector<Eigen::Index>& cols) const {
    const Eigen::Index k = static_cast<Eigen::Index>(cols.size());
    Result result;
    if (n_ <= k) return result;
    MatrixXd g(k, k);
    VectorXd b(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      b(i) = xty_(cols[i]);
      for (Eigen::Index j = 0; j < k; ++j) g(i, j) = gram_(cols[i], cols[j]);
    }
    Eigen::LLT<MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) return result;
    // Reject near-singular subsets: smallest pivot relative to the largest.
    const VectorXd diag = MatrixXd(llt.matrixL()).diagonal();
    if (diag.minCoeff() <= 1e-6 * diag.maxCoeff()) return result;
    result.beta = llt.solve(b);
    const double rss = std::max(0.0, yty_ - result.beta.dot(b));
    const double dof = static_cast<double>(n_ - k);
    const double sigma2 = rss / dof;
    const MatrixXd inv = llt.solve(MatrixXd::Identity(k, k));
    result.p_values.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const double se = std::sqrt(std::max(0.0, sigma2 * inv(i, i)));
      double t;
      if (se > 0.0) {
        t = result.beta(i) / se;
      } else {
        t = result.beta(i) == 0.0
                ? 0.0
                : std::copysign(std::numeric_limits<double>::infinity(), result.beta(i));
      }
      result.p_values(i) = stats::StudentTTwoSidedP(t, dof);
    }
    result.ok = true;
    return result;
  }

 private:
  Eigen::Index n_;
  MatrixXd gram_;
  VectorXd xty_;
  double yty_ = 0.0;
};

bool Eligible(const TermDescriptor& term, int level, const std::set<int>& interaction,
              const std::set<MemberKey>& included) {
  if (term.order != level) return false;
  if (level == 1) return true;
  for (const auto& m : term.members) {
    if (!interaction.count(m.stratum)) return false;
  }
  for (std::size_t drop = 0; drop < term.members.size(); ++drop) {
    MemberKey sub;
    for (std::size_t i = 0; i < term.members.size(); ++i) {
      if (i != drop) sub.emplace_back(term.members[i].stratum, term.members[i].position);
    }
    if (!included.count(sub)) return false;
  }
  return true;
}

}  // namespace

void SelectionConfig::Validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "selection alpha must lie in (0, 1)");
  }
  if (max_level < 1) Fail(ErrorCode::kInvalidArgument, "selection max_level must be >= 1");
  std::set<int> distinct(interaction_strata.begin(), interaction_strata.end());
  if (max_level > 1 && max_level > static_cast<int>(distinct.size())) {
    Fail(ErrorCode::kInvalidArgument,
         "selection max_level exceeds the number of interaction strata");
  }
}

SelectionConfig SelectionConfig::FromJson(const nlohmann::json& doc) {
  SelectionConfig c;
  try {
    for (const auto& [name, v] : doc.items()) {
      if (name != "alpha" && name != "max_level" && name != "interaction_strata" &&
          name != "policy" && name != "mode") {
        Fail(ErrorCode::kValidation, "selection: unknown field '" + name + "'");
      }
    }
    c.alpha = doc.value("alpha", c.alpha);
    c.max_level = doc.value("max_level", c.max_level);
    if (doc.contains("interaction_strata")) {
      c.interaction_strata = doc["interaction_strata"].get<std::vector<int>>();
    }
    const std::string policy = doc.value("policy", "per_level_bonferroni");
    if (policy == "per_level_bonferroni") {
      c.policy = LevelPolicy::kPerLevelBonferroni;
    } else if (policy == "global_bonferroni") {
      c.policy = LevelPolicy::kGlobalBonferroni;
    } else {
      Fail(ErrorCode::kValidation, "selection.policy: unknown value '" + policy + "'");
    }
    const std::string mode = doc.value("mode", "greedy");
    if (mode == "greedy") {
      c.mode = SelectionMode::kGreedy;
    } else if (mode == "joint") {
      c.mode = SelectionMode::kJoint;
    } else {
      Fail(ErrorCode::kValidation, "selection.mode: unknown value '" + mode + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kValidation, std::string("selection: ") + e.what());
  }
  return c;
}

nlohmann::json SelectionStep::ToJson() const {
  nlohmann::json doc = {{"step", step},
                        {"level", level},
                        {"term", term},
                        {"p_value", p_value},
                        {"threshold", threshold},
                        {"admitted", admitted}};
  if (!note.empty()) doc["note"] = note;
  return doc;
}

bool SatisfiesHierarchy(const std::vector<TermDescriptor>& included) {
  std::set<MemberKey> keys;
  for (const auto& t : included) keys.insert(KeyOf(t));
  for (const auto& t : included) {
    if (t.order < 2) continue;
    for (std::size_t drop = 0; drop < t.members.size(); ++drop) {
      MemberKey sub;
      for (std::size_t i = 0; i < t.members.size(); ++i) {
        if (i != drop) sub.emplace_back(t.members[i].stratum, t.members[i].position);
      }
      if (!keys.count(sub)) return false;
    }
  }
  return true;
}

SelectionTrace ForwardSelect(const DesignMatrix& universe, std::span<const double> y,
                             const SelectionConfig& config) {
  config.Validate();
  if (universe.cols() <= 1) Fail(ErrorCode::kInvalidArgument, "selection universe is empty");
  if (universe.rows() != y.size()) {
    Fail(ErrorCode::kInvalidArgument, "response length does not match the universe rows");
  }
  const auto& terms = universe.column_terms();
  const MatrixXd x = ToEigen(universe);
  const SubsetOls ols(x, y);
  const std::set<int> interaction(config.interaction_strata.begin(),
                                  config.interaction_strata.end());

  std::size_t global_count = 0;
  for (const auto& t : terms) {
    if (t.order >= 1 && t.order <= config.max_level) ++global_count;
  }

  SelectionTrace trace;
  std::vector<Eigen::Index> model{0};
  std::set<MemberKey> included;
  int step = 0;

  for (int level = 1; level <= config.max_level; ++level) {
    std::vector<Eigen::Index> candidates;
    for (std::size_t c = 1; c < terms.size(); ++c) {
      if (Eligible(terms[c], level, interaction, included)) {
        candidates.push_back(static_cast<Eigen::Index>(c));
      }
    }
    if (candidates.empty()) continue;
    const double threshold =
        config.alpha / static_cast<double>(config.policy == LevelPolicy::kPerLevelBonferroni
                                               ? candidates.size()
                                               : global_count);

    auto admit = [&](Eigen::Index c) {
      model.push_back(c);
      included.insert(KeyOf(terms[c]));
      trace.included.push_back(terms[c].label);
    };

    if (config.mode == SelectionMode::kJoint) {
      ++step;
      std::vector<Eigen::Index> cols = model;
      cols.insert(cols.end(), candidates.begin(), candidates.end());
      const auto fit = ols.Fit(cols);
      std::vector<Eigen::Index> keep;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        SelectionStep s{step, level, terms[candidates[i]].label, 1.0, threshold, false, ""};
        if (!fit.ok) {
          s.note = "rank_deficient";
        } else {
          s.p_value = fit.p_values(static_cast<Eigen::Index>(model.size() + i));
          s.admitted = s.p_value < threshold;
          if (s.admitted) keep.push_back(candidates[i]);
        }
        trace.log.push_back(std::move(s));
      }
      for (Eigen::Index c : keep) admit(c);
      continue;
    }

    std::vector<Eigen::Index> remaining = candidates;
    while (!remaining.empty()) {
      ++step;
      const std::size_t log_start = trace.log.size();
      std::optional<std::size_t> best;
      double best_p = 1.0;
      for (std::size_t i = 0; i < remaining.size(); ++i) {
        std::vector<Eigen::Index> cols = model;
        cols.push_back(remaining[i]);
        const auto fit = ols.Fit(cols);
        SelectionStep s{step, level, terms[remaining[i]].label, 1.0, threshold, false, ""};
        if (!fit.ok) {
          s.note = "rank_deficient";
        } else {
          s.p_value = fit.p_values(static_cast<Eigen::Index>(model.size()));
          if (s.p_value < threshold &&
              (!best || s.p_value < best_p ||
               (s.p_value == best_p && s.term < terms[remaining[*best]].label))) {
            best = i;
            best_p = s.p_value;
          }
        }
        trace.log.push_back(std::move(s));
      }
      if (!best) break;
      trace.log[log_start + *best].admitted = true;
      admit(remaining[*best]);
      remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(*best));
    }
  }

  std::vector<std::size_t> cols(model.begin(), model.end());
  trace.final_fit = FitOls(universe.SelectColumns(cols), y);
  return trace;
}

}  // namespace iams
