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

#include "iams/shapley.hpp"

#include <cmath>
#include <ostream>

#include "iams/csv.hpp"
#include "iams/error.hpp"

namespace iams {
namespace {

double Binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

}  // namespace

std::vector<ShapleyEstimate> ShapleyValues(const PromptModel& model,
                                           const CoalitionValue& value,
                                           ShapleyWeighting weighting, std::uint64_t cap) {
  const std::vector<int> variable = model.variable_strata();
  const int total = model.num_variable_components();
  std::vector<int> base(model.num_strata(), 0);
  for (int s : variable) base[s] = kEmptySelection;

  std::vector<ShapleyEstimate> out;
  for (int stratum : variable) {
    const int own = static_cast<int>(model.stratum(stratum).components.size());
    std::vector<int> others;
    std::uint64_t coalitions = 1;
    for (int s : variable) {
      if (s == stratum) continue;
      others.push_back(s);
      const std::uint64_t choices = model.stratum(s).components.size() + 1;
      if (coalitions > cap / choices + 1) coalitions = cap + 1;
      else coalitions *= choices;
    }
    if (coalitions > cap) {
      Fail(ErrorCode::kTooLarge, "stratum " + std::to_string(stratum) +
                                     ": feasible coalitions exceed the cap of " +
                                     std::to_string(cap));
    }

    for (int pos = 0; pos < own; ++pos) {
      ShapleyEstimate est;
      est.component_id = model.stratum(stratum).components[pos].id;
      est.stratum = stratum;
      est.position = pos;
      est.k = total - own;
      est.coalitions_by_size.assign(est.k + 1, 0);
      std::vector<double> sums(est.k + 1, 0.0);
      double literal = 0.0;

      // Odometer over the other variable strata; index 0 is the empty choice.
      std::vector<int> choice(others.size(), 0);
      std::vector<int> sel = base;
      while (true) {
        int size = 0;
        for (std::size_t i = 0; i < others.size(); ++i) {
          sel[others[i]] = choice[i] - 1;
          if (choice[i] > 0) ++size;
        }
        sel[stratum] = kEmptySelection;
        const double without = value(sel);
        sel[stratum] = pos;
        const double with = value(sel);
        const double delta = with - without;
        sums[size] += delta;
        ++est.coalitions_by_size[size];
        literal += Binomial(est.k, size) * delta;

        bool wrapped = true;
        for (std::size_t i = others.size(); i-- > 0;) {
          if (++choice[i] <= static_cast<int>(model.stratum(others[i]).components.size())) {
            wrapped = false;
            break;
          }
          choice[i] = 0;
        }
        if (wrapped) break;
      }

      est.mean_marginal_by_size.assign(est.k + 1, 0.0);
      double acc = 0.0;
      int realized = 0;
      for (int d = 0; d <= est.k; ++d) {
        if (est.coalitions_by_size[d] == 0) continue;
        est.mean_marginal_by_size[d] = sums[d] / static_cast<double>(est.coalitions_by_size[d]);
        acc += est.mean_marginal_by_size[d];
        ++realized;
      }
      if (weighting == ShapleyWeighting::kSizeStratified) {
        est.phi = acc / realized;
      } else {
        if (est.k == 0) {
          Fail(ErrorCode::kInvalidArgument,
               "literal weighting is undefined for a component with no co-occurring "
               "components");
        }
        est.phi = literal / est.k;
      }
      out.push_back(std::move(est));
    }
  }
  return out;
}

CoalitionValue ScoreTableValue(const PromptModel& model, std::map<std::string, double> scores) {
  return [&model, scores = std::move(scores)](const std::vector<int>& selections) {
    const std::string key = SubpromptKey(model, selections);
    auto it = scores.find(key);
    if (it == scores.end()) {
      Fail(ErrorCode::kMissingArtifact, "no score for coalition '" + key + "'");
    }
    return it->second;
  };
}

std::vector<double> ClassicShapley(const std::function<double(std::uint32_t)>& value, int n) {
  if (n < 1 || n > 12) {
    Fail(ErrorCode::kInvalidArgument, "classic Shapley supports 1..12 features, got " +
                                          std::to_string(n));
  }
  const std::uint32_t full = (1u << n);
  std::vector<double> v(full);
  for (std::uint32_t mask = 0; mask < full; ++mask) v[mask] = value(mask);
  // weight[s] = s! (n - s - 1)! / n!
  std::vector<double> weight(n);
  for (int s = 0; s < n; ++s) weight[s] = 1.0 / (n * Binomial(n - 1, s));
  std::vector<double> phi(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const std::uint32_t bit = 1u << i;
    for (std::uint32_t mask = 0; mask < full; ++mask) {
      if (mask & bit) continue;
      phi[i] += weight[__builtin_popcount(mask)] * (v[mask | bit] - v[mask]);
    }
  }
  return phi;
}

double ShapleyVsFirstOrder(const std::vector<ShapleyEstimate>& estimates, const FitResult& fit) {
  std::vector<double> phi;
  std::vector<double> coef;
  for (const auto& e : estimates) {
    const auto idx = fit.index_of(e.component_id);
    if (!idx || fit.orders[*idx] != 1) {
      Fail(ErrorCode::kValidation, "component '" + e.component_id +
                                       "' has no first-order coefficient in the fit");
    }
    phi.push_back(e.phi);
    coef.push_back(fit.coefficients[*idx]);
  }
  return Pearson(phi, coef);
}

void WriteShapleyCsv(std::ostream& out, const std::vector<ShapleyEstimate>& estimates) {
  csv::WriteRow(out, {"component_id", "stratum", "phi", "k_i"});
  for (const auto& e : estimates) {
    csv::WriteRow(out, {e.component_id, std::to_string(e.stratum), csv::FormatDouble(e.phi),
                        std::to_string(e.k)});
  }
}

nlohmann::json ShapleyToJson(const std::vector<ShapleyEstimate>& estimates) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : estimates) {
    arr.push_back({{"component_id", e.component_id},
                   {"stratum", e.stratum},
                   {"position", e.position},
                   {"phi", e.phi},
                   {"k_i", e.k},
                   {"coalitions_by_size", e.coalitions_by_size},
                   {"mean_marginal_by_size", e.mean_marginal_by_size}});
  }
  return arr;
}

std::vector<ShapleyEstimate> ShapleyFromJson(const nlohmann::json& doc) {
  std::vector<ShapleyEstimate> out;
  try {
    for (const auto& e : doc) {
      ShapleyEstimate est;
      est.component_id = e.at("component_id").get<std::string>();
      est.stratum = e.at("stratum").get<int>();
      est.position = e.at("position").get<int>();
      est.phi = e.at("phi").get<double>();
      est.k = e.at("k_i").get<int>();
      est.coalitions_by_size = e.at("coalitions_by_size").get<std::vector<std::uint64_t>>();
      est.mean_marginal_by_size = e.at("mean_marginal_by_size").get<std::vector<double>>();
      out.push_back(std::move(est));
    }
  } catch (const nlohmann::json::exception& ex) {
    Fail(ErrorCode::kValidation, std::string("malformed shapley estimates: ") + ex.what());
  }
  return out;
}

}  // namespace iams
