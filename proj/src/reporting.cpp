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

#include "iams/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "iams/csv.hpp"
#include "iams/error.hpp"
#include "iams/stats.hpp"
#include "iams/util.hpp"

namespace iams {
namespace {

constexpr const char* kHashPrefix = "manifest_hash=";

std::string JoinTags(const std::vector<std::string>& tags) {
  std::string out;
  for (const auto& t : tags) {
    if (!out.empty()) out += ';';
    out += t;
  }
  return out;
}

std::vector<std::string> SplitTags(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = s.find(';', start);
    out.push_back(s.substr(start, end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

std::string OptionalNumber(const std::optional<double>& v) {
  return v ? csv::FormatDouble(*v) : std::string();
}

std::optional<double> ParseOptional(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

void WriteWithHash(const std::filesystem::path& file, const std::string& hash,
                   const std::string& body) {
  std::string contents;
  if (!hash.empty()) contents = "# " + std::string(kHashPrefix) + hash + "\n";
  contents += body;
  WriteFileAtomic(file.string(), contents);
}

std::string HashFromComments(const csv::Table& table) {
  for (std::string_view c : table.comments) {
    while (!c.empty() && c.front() == ' ') c.remove_prefix(1);
    if (c.starts_with(kHashPrefix)) return std::string(c.substr(std::string_view(kHashPrefix).size()));
  }
  return {};
}

nlohmann::json NumberOrNull(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

std::string SignificanceStars(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "p-value must lie in [0, 1]");
  }
  if (p < 0.0001) return "***";
  if (p < 0.005) return "**";
  if (p < 0.05) return "*";
  return "";
}

std::vector<HistogramBin> Histogram(std::span<const double> values, int bins) {
  if (values.empty()) Fail(ErrorCode::kInvalidArgument, "histogram of an empty vector");
  if (bins < 1) Fail(ErrorCode::kInvalidArgument, "histogram needs at least one bin");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    Fail(ErrorCode::kInvalidArgument, "histogram values must be finite");
  }
  if (lo == hi) return {HistogramBin{lo, hi, values.size()}};
  const double width = (hi - lo) / bins;
  std::vector<HistogramBin> out(bins);
  for (int b = 0; b < bins; ++b) {
    out[b].left = lo + width * b;
    out[b].right = b + 1 == bins ? hi : lo + width * (b + 1);
  }
  for (double v : values) {
    int b = static_cast<int>(std::floor((v - lo) / width));
    b = std::clamp(b, 0, bins - 1);
    ++out[b].count;
  }
  return out;
}

CoefficientTable BuildCoefficientTable(const ReportInputs& inputs) {
  std::set<std::string> universe(inputs.universe.begin(), inputs.universe.end());
  std::set<std::string> present;
  for (const auto& [model, fit] : inputs.fits) {
    for (const auto& label : fit.labels) {
      if (!universe.count(label)) {
        Fail(ErrorCode::kValidation, "term-universe mismatch: model '" + model +
                                         "' has term '" + label +
                                         "' outside the report universe");
      }
      present.insert(label);
    }
  }
  CoefficientTable table;
  for (const auto& [model, fit] : inputs.fits) table.models.push_back(model);
  for (const auto& label : inputs.universe) {
    if (!present.count(label)) continue;
    CoefficientRow row;
    row.label = label;
    if (auto it = inputs.tags.find(label); it != inputs.tags.end()) row.tags = it->second;
    for (const auto& [model, fit] : inputs.fits) {
      const auto idx = fit.index_of(label);
      if (!idx) {
        row.cells.emplace_back();
        continue;
      }
      CoefficientCell cell;
      cell.coefficient = fit.coefficients[*idx];
      if (fit.has_inference()) {
        cell.std_error = fit.std_errors[*idx];
        cell.p_value = fit.p_values[*idx];
        if (std::isfinite(*cell.p_value)) cell.stars = SignificanceStars(*cell.p_value);
      }
      row.cells.push_back(std::move(cell));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

ReportBundle BuildComparisonReport(const ReportInputs& inputs) {
  if (inputs.fits.empty()) Fail(ErrorCode::kInvalidArgument, "report needs at least one fit");
  ReportBundle bundle;
  bundle.manifest_hash = inputs.manifest_hash;
  bundle.coefficients = BuildCoefficientTable(inputs);
  if (inputs.path) {
    for (const auto& label : inputs.path->labels) {
      if (std::find(inputs.universe.begin(), inputs.universe.end(), label) ==
          inputs.universe.end()) {
        Fail(ErrorCode::kValidation,
             "term-universe mismatch: lasso path term '" + label + "' is outside the universe");
      }
    }
    bundle.path = inputs.path;
  }
  if (!inputs.dcpmi.empty()) bundle.dcpmi_hist = Histogram(inputs.dcpmi, inputs.bins);

  const std::string qq_model = inputs.qq_model.empty() ? inputs.fits.front().first
                                                       : inputs.qq_model;
  const FitResult* qq_fit = nullptr;
  for (const auto& [model, fit] : inputs.fits) {
    if (model == qq_model) qq_fit = &fit;
  }
  if (!qq_fit) Fail(ErrorCode::kInvalidArgument, "no fit named '" + qq_model + "' for QQ data");
  if (qq_fit->residuals.size() >= 3) bundle.qq = MakeQqData(qq_fit->residuals);

  nlohmann::json summary;
  summary["manifest_hash"] = inputs.manifest_hash;
  summary["models"] = bundle.coefficients.models;
  summary["baseline_probability"] =
      inputs.baseline_probability ? nlohmann::json(*inputs.baseline_probability) : nullptr;
  summary["n_scores"] = inputs.dcpmi.size();
  summary["mean_dcpmi"] =
      inputs.dcpmi.empty() ? nlohmann::json(nullptr) : nlohmann::json(stats::Mean(inputs.dcpmi));
  nlohmann::json fits = nlohmann::json::object();
  for (const auto& [model, fit] : inputs.fits) {
    fits[model] = {{"method", fit.method},
                   {"terms", fit.labels.size()},
                   {"r_squared", NumberOrNull(fit.r_squared)},
                   {"adj_r_squared", NumberOrNull(fit.adj_r_squared)},
                   {"mse", NumberOrNull(fit.mse)},
                   {"lambda", fit.lambda}};
  }
  summary["fits"] = fits;
  if (bundle.qq) {
    summary["qq"] = {{"model", qq_model},
                     {"slope", bundle.qq->slope},
                     {"intercept", bundle.qq->intercept}};
  }
  if (!inputs.shapley.empty()) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& e : inputs.shapley) {
      comps.push_back({{"component_id", e.component_id}, {"phi", e.phi}, {"k_i", e.k}});
    }
    summary["shapley"] = {{"components", comps}};
    for (const auto& [model, fit] : inputs.fits) {
      try {
        summary["shapley"]["pearson_vs_" + model] = ShapleyVsFirstOrder(inputs.shapley, fit);
      } catch (const Error&) {
        // Fits without every first-order term have no correlation to report.
      }
    }
  }
  if (inputs.path && !inputs.path->lambdas.empty()) {
    summary["lasso_path"] = {{"points", inputs.path->lambdas.size()},
                             {"lambda_min", inputs.path->lambdas.front()},
                             {"lambda_max", inputs.path->lambdas.back()}};
  }
  bundle.summary = std::move(summary);
  return bundle;
}

void WriteCoefficientCsv(std::ostream& out, const CoefficientTable& table) {
  std::vector<std::string> header{"term", "tags"};
  for (const auto& m : table.models) {
    for (const char* suffix : {":coef", ":se", ":p", ":stars"}) header.push_back(m + suffix);
  }
  csv::WriteRow(out, header);
  for (const auto& row : table.rows) {
    std::vector<std::string> fields{row.label, JoinTags(row.tags)};
    for (const auto& cell : row.cells) {
      if (!cell) {
        fields.insert(fields.end(), 4, std::string());
        continue;
      }
      fields.push_back(csv::FormatDouble(cell->coefficient));
      fields.push_back(OptionalNumber(cell->std_error));
      fields.push_back(OptionalNumber(cell->p_value));
      fields.push_back(cell->stars);
    }
    csv::WriteRow(out, fields);
  }
}

CoefficientTable ReadCoefficientCsv(std::istream& in) {
  const csv::Table t = csv::Read(in);
  CoefficientTable table;
  for (std::size_t c = 2; c + 3 < t.header.size(); c += 4) {
    const std::string& h = t.header[c];
    table.models.push_back(h.substr(0, h.rfind(':')));
  }
  for (const auto& r : t.rows) {
    CoefficientRow row;
    row.label = r[0];
    row.tags = SplitTags(r[1]);
    for (std::size_t m = 0; m < table.models.size(); ++m) {
      const std::size_t c = 2 + 4 * m;
      if (r[c].empty()) {
        row.cells.emplace_back();
        continue;
      }
      CoefficientCell cell;
      cell.coefficient = std::stod(r[c]);
      cell.std_error = ParseOptional(r[c + 1]);
      cell.p_value = ParseOptional(r[c + 2]);
      cell.stars = r[c + 3];
      row.cells.push_back(std::move(cell));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void WriteReportBundle(const ReportBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string& hash = bundle.manifest_hash;
  {
    std::ostringstream ss;
    WriteCoefficientCsv(ss, bundle.coefficients);
    WriteWithHash(dir / "coefficients.csv", hash, ss.str());
  }
  {
    std::ostringstream ss;
    csv::WriteRow(ss, {"bin_left", "bin_right", "count"});
    for (const auto& b : bundle.dcpmi_hist) {
      csv::WriteRow(ss, {csv::FormatDouble(b.left), csv::FormatDouble(b.right),
                         std::to_string(b.count)});
    }
    WriteWithHash(dir / "dcpmi_hist.csv", hash, ss.str());
  }
  {
    std::ostringstream ss;
    csv::WriteRow(ss, {"theoretical_quantile", "standardized_residual"});
    if (bundle.qq) {
      for (std::size_t i = 0; i < bundle.qq->theoretical.size(); ++i) {
        csv::WriteRow(ss, {csv::FormatDouble(bundle.qq->theoretical[i]),
                           csv::FormatDouble(bundle.qq->standardized[i])});
      }
    }
    WriteWithHash(dir / "qq.csv", hash, ss.str());
  }
  {
    std::ostringstream ss;
    if (bundle.path) {
      bundle.path->WriteCsv(ss);
    } else {
      csv::WriteRow(ss, {"lambda", "mse", "norm_total"});
    }
    WriteWithHash(dir / "lasso_path.csv", hash, ss.str());
  }
  WriteFileAtomic((dir / "summary.json").string(), bundle.summary.dump(2) + "\n");
}

ReportBundle ReadReportBundle(const std::filesystem::path& dir) {
  auto open = [&](const char* name) {
    std::ifstream in(dir / name, std::ios::binary);
    if (!in) Fail(ErrorCode::kMissingArtifact, "report file missing: " + (dir / name).string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  ReportBundle bundle;
  {
    std::istringstream in(open("coefficients.csv"));
    bundle.coefficients = ReadCoefficientCsv(in);
    in.clear();
    in.seekg(0);
    bundle.manifest_hash = HashFromComments(csv::Read(in));
  }
  {
    std::istringstream in(open("dcpmi_hist.csv"));
    const csv::Table t = csv::Read(in);
    for (const auto& r : t.rows) {
      bundle.dcpmi_hist.push_back({std::stod(r[0]), std::stod(r[1]), std::stoul(r[2])});
    }
  }
  try {
    bundle.summary = nlohmann::json::parse(open("summary.json"));
  } catch (const nlohmann::json::parse_error& e) {
    Fail(ErrorCode::kValidation, std::string("summary.json: ") + e.what());
  }
  {
    std::istringstream in(open("qq.csv"));
    const csv::Table t = csv::Read(in);
    if (!t.rows.empty()) {
      QqData qq;
      for (const auto& r : t.rows) {
        qq.theoretical.push_back(std::stod(r[0]));
        qq.standardized.push_back(std::stod(r[1]));
      }
      if (bundle.summary.contains("qq")) {
        qq.slope = bundle.summary["qq"]["slope"].get<double>();
        qq.intercept = bundle.summary["qq"]["intercept"].get<double>();
      }
      bundle.qq = std::move(qq);
    }
  }
  {
    std::istringstream in(open("lasso_path.csv"));
    LassoPath path = LassoPath::ReadCsv(in);
    if (!path.lambdas.empty()) bundle.path = std::move(path);
  }
  return bundle;
}

}  // namespace iams
