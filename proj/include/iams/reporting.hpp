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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "iams/regression.hpp"
#include "iams/shapley.hpp"
#include "json.hpp"

namespace iams {

// "***" for p < 0.0001, "**" for p < 0.005, "*" for p < 0.05, else "".
std::string SignificanceStars(double p);

struct HistogramBin {
  double left = 0.0;
  double right = 0.0;
  std::size_t count = 0;

  friend bool operator==(const HistogramBin&, const HistogramBin&) = default;
};

// Equal-width bins over [min, max], the last bin closed on the right. A
// constant input yields a single bin.
std::vector<HistogramBin> Histogram(std::span<const double> values, int bins);

struct CoefficientCell {
  double coefficient = 0.0;
  std::optional<double> std_error;
  std::optional<double> p_value;
  std::string stars;
};

struct CoefficientRow {
  std::string label;
  std::vector<std::string> tags;
  std::vector<std::optional<CoefficientCell>> cells;  // one per model
};

struct CoefficientTable {
  std::vector<std::string> models;
  std::vector<CoefficientRow> rows;
};

struct ReportInputs {
  // Display order of every admissible term, intercept first.
  std::vector<std::string> universe;
  std::map<std::string, std::vector<std::string>> tags;  // by term label
  std::vector<std::pair<std::string, FitResult>> fits;
  std::vector<ShapleyEstimate> shapley;
  std::optional<LassoPath> path;
  std::vector<double> dcpmi;
  std::optional<double> baseline_probability;
  std::string qq_model;  // fit whose residuals feed the QQ data; default first
  int bins = 50;
  std::string manifest_hash;
};

struct ReportBundle {
  CoefficientTable coefficients;
  std::vector<HistogramBin> dcpmi_hist;
  std::optional<QqData> qq;
  std::optional<LassoPath> path;
  nlohmann::json summary;
  std::string manifest_hash;
};

CoefficientTable BuildCoefficientTable(const ReportInputs& inputs);

// Throws Error(kValidation) on a term-universe mismatch.
ReportBundle BuildComparisonReport(const ReportInputs& inputs);

// Writes coefficients.csv, dcpmi_hist.csv, qq.csv, lasso_path.csv and
// summary.json into `dir`. CSV files begin with a "# manifest_hash=" line.
void WriteReportBundle(const ReportBundle& bundle, const std::filesystem::path& dir);
ReportBundle ReadReportBundle(const std::filesystem::path& dir);

void WriteCoefficientCsv(std::ostream& out, const CoefficientTable& table);
CoefficientTable ReadCoefficientCsv(std::istream& in);

}  // namespace iams
