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

#include "iams/iams.h"

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "iams/encoding.hpp"
#include "iams/error.hpp"
#include "iams/pipeline.hpp"
#include "iams/prompt_model.hpp"
#include "iams/regression.hpp"

struct iams_model {
  iams::PromptModel model;
};

struct iams_design {
  iams::DesignMatrix design;
};

struct iams_fit {
  iams::FitResult fit;
};

struct iams_run {
  std::string manifest_path;
  std::string out_dir;
  iams::RunOverrides overrides;
};

namespace {

thread_local std::string last_error;

iams_status Status(iams::ErrorCode code) { return static_cast<iams_status>(code); }

template <typename Fn>
iams_status Guard(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return IAMS_OK;
  } catch (const iams::Error& e) {
    last_error = e.what();
    return Status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return IAMS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return IAMS_ERR_INTERNAL;
  }
}

char* Dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void Require(bool ok, const char* what) {
  if (!ok) iams::Fail(iams::ErrorCode::kInvalidArgument, what);
}

Eigen::MatrixXd DenseX(const double* x, size_t rows, size_t cols) {
  Require(x != nullptr && rows > 0 && cols > 0, "x must be a non-empty matrix");
  return Eigen::Map<const Eigen::MatrixXd>(x, static_cast<Eigen::Index>(rows),
                                           static_cast<Eigen::Index>(cols));
}

template <typename T>
T ParseNumber(const char* name, const char* value) {
  T out{};
  const char* end = value + std::strlen(value);
  auto [ptr, ec] = std::from_chars(value, end, out);
  if (ec != std::errc() || ptr != end) {
    iams::Fail(iams::ErrorCode::kInvalidArgument,
               std::string("option '") + name + "': cannot parse '" + value + "'");
  }
  return out;
}

iams_status CopyOut(const std::vector<double>& src, double* out, size_t n, const char* what) {
  return Guard([&] {
    Require(out != nullptr, "output buffer is null");
    if (src.empty()) {
      iams::Fail(iams::ErrorCode::kInvalidArgument, std::string(what) + " unavailable for this fit");
    }
    std::memcpy(out, src.data(), std::min(n, src.size()) * sizeof(double));
  });
}

}  // namespace

extern "C" {

const char* iams_version(void) { return "0.1.0"; }

const char* iams_status_name(iams_status status) {
  if (status == IAMS_OK) return "ok";
  return iams::ErrorCodeName(static_cast<iams::ErrorCode>(status));
}

const char* iams_last_error(void) { return last_error.c_str(); }

void iams_string_free(char* s) { std::free(s); }

iams_status iams_model_load(const char* path, iams_model** out) {
  return Guard([&] {
    Require(path && out, "path and out must be non-null");
    *out = new iams_model{iams::PromptModel::FromFile(path)};
  });
}

iams_status iams_model_parse(const char* json_text, iams_model** out) {
  return Guard([&] {
    Require(json_text && out, "json_text and out must be non-null");
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
      iams::Fail(iams::ErrorCode::kValidation, e.what());
    }
    *out = new iams_model{iams::PromptModel::FromJson(doc)};
  });
}

void iams_model_free(iams_model* model) { delete model; }

iams_status iams_model_subprompt_count(const iams_model* model, uint64_t* out) {
  return Guard([&] {
    Require(model && out, "model and out must be non-null");
    *out = model->model.subprompt_count();
  });
}

iams_status iams_model_describe(const iams_model* model, char** out_json) {
  return Guard([&] {
    Require(model && out_json, "model and out_json must be non-null");
    *out_json = Dup(iams::DescribeModel(model->model).dump(2));
  });
}

iams_status iams_model_list_subprompts(const iams_model* model, char** out_text) {
  return Guard([&] {
    Require(model && out_text, "model and out_text must be non-null");
    std::string text;
    for (const auto& sub : iams::EnumerateSubprompts(model->model)) text += sub.key + "\n";
    *out_text = Dup(text);
  });
}

iams_status iams_design_build(const iams_model* model, const int* strata, size_t num_strata,
                              int max_order, int repeats, iams_design** out) {
  return Guard([&] {
    Require(model && out, "model and out must be non-null");
    Require(repeats >= 1, "repeats must be at least 1");
    std::vector<int> chosen = strata ? std::vector<int>(strata, strata + num_strata)
                                     : model->model.variable_strata();
    const auto terms = iams::TermUniverse(model->model, chosen, max_order);
    const auto subs = iams::EnumerateSubprompts(model->model);
    *out = new iams_design{iams::BuildDesignMatrix(model->model, subs, terms, repeats)};
  });
}

void iams_design_free(iams_design* design) { delete design; }

size_t iams_design_rows(const iams_design* design) { return design ? design->design.rows() : 0; }

size_t iams_design_cols(const iams_design* design) { return design ? design->design.cols() : 0; }

iams_status iams_design_value(const iams_design* design, size_t row, size_t col, uint8_t* out) {
  return Guard([&] {
    Require(design && out, "design and out must be non-null");
    Require(row < design->design.rows() && col < design->design.cols(), "index out of range");
    *out = design->design.at(row, col);
  });
}

iams_status iams_design_label(const iams_design* design, size_t col, char** out) {
  return Guard([&] {
    Require(design && out, "design and out must be non-null");
    Require(col < design->design.cols(), "column out of range");
    *out = Dup(design->design.column_terms()[col].label);
  });
}

iams_status iams_fit_ols(const double* x, size_t rows, size_t cols, const double* y,
                         iams_fit** out) {
  return Guard([&] {
    Require(y && out, "y and out must be non-null");
    const auto m = DenseX(x, rows, cols);
    *out = new iams_fit{iams::FitOls(m, {y, rows}, iams::ColumnInfo::Generic(cols))};
  });
}

iams_status iams_fit_lasso(const double* x, size_t rows, size_t cols, const double* y,
                           double lambda, iams_fit** out) {
  return Guard([&] {
    Require(y && out, "y and out must be non-null");
    const auto m = DenseX(x, rows, cols);
    *out = new iams_fit{iams::FitLasso(m, {y, rows}, lambda, iams::ColumnInfo::Generic(cols))};
  });
}

iams_status iams_fit_logistic(const double* x, size_t rows, size_t cols, const double* y,
                              double lambda, iams_fit** out) {
  return Guard([&] {
    Require(y && out, "y and out must be non-null");
    const auto m = DenseX(x, rows, cols);
    *out = new iams_fit{
        iams::FitLogistic(m, {y, rows}, lambda, iams::ColumnInfo::Generic(cols))};
  });
}

void iams_fit_free(iams_fit* fit) { delete fit; }

size_t iams_fit_size(const iams_fit* fit) { return fit ? fit->fit.coefficients.size() : 0; }

iams_status iams_fit_coefficients(const iams_fit* fit, double* out, size_t n) {
  if (!fit) return Guard([] { Require(false, "fit must be non-null"); });
  return CopyOut(fit->fit.coefficients, out, n, "coefficients");
}

iams_status iams_fit_std_errors(const iams_fit* fit, double* out, size_t n) {
  if (!fit) return Guard([] { Require(false, "fit must be non-null"); });
  return CopyOut(fit->fit.std_errors, out, n, "standard errors");
}

iams_status iams_fit_p_values(const iams_fit* fit, double* out, size_t n) {
  if (!fit) return Guard([] { Require(false, "fit must be non-null"); });
  return CopyOut(fit->fit.p_values, out, n, "p-values");
}

iams_status iams_fit_r_squared(const iams_fit* fit, double* out) {
  return Guard([&] {
    Require(fit && out, "fit and out must be non-null");
    *out = fit->fit.r_squared;
  });
}

iams_status iams_fit_to_json(const iams_fit* fit, char** out_json) {
  return Guard([&] {
    Require(fit && out_json, "fit and out_json must be non-null");
    *out_json = Dup(fit->fit.ToJson().dump(2));
  });
}

iams_status iams_run_open(const char* manifest_path, const char* out_dir, iams_run** out) {
  return Guard([&] {
    Require(manifest_path && out_dir && out, "manifest_path, out_dir and out must be non-null");
    *out = new iams_run{manifest_path, out_dir, {}};
  });
}

iams_status iams_run_set_option(iams_run* run, const char* name, const char* value) {
  return Guard([&] {
    Require(run && name && value, "run, name and value must be non-null");
    const std::string n = name;
    auto& o = run->overrides;
    if (n == "model") {
      o.model = value;
    } else if (n == "scorer") {
      o.scorer = value;
    } else if (n == "lambda") {
      o.lambda = ParseNumber<double>(name, value);
    } else if (n == "grid") {
      o.grid = value;
    } else if (n == "max_order") {
      o.max_order = ParseNumber<int>(name, value);
    } else if (n == "alpha") {
      o.alpha = ParseNumber<double>(name, value);
    } else if (n == "seed") {
      o.seed = ParseNumber<std::uint64_t>(name, value);
    } else {
      iams::Fail(iams::ErrorCode::kInvalidArgument, "unknown option '" + n + "'");
    }
  });
}

iams_status iams_run_execute(iams_run* run, const char* command, char** out_json) {
  return Guard([&] {
    Require(run && command && out_json, "run, command and out_json must be non-null");
    iams::Pipeline pipeline(iams::RunManifest::Load(run->manifest_path), run->out_dir,
                            run->overrides);
    *out_json = Dup(pipeline.Execute(command).dump(2));
  });
}

void iams_run_free(iams_run* run) { delete run; }

}  // extern "C"
