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

#ifndef IAMS_IAMS_H_
#define IAMS_IAMS_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(IAMS_BUILDING_LIBRARY)
#define IAMS_API __declspec(dllexport)
#else
#define IAMS_API __declspec(dllimport)
#endif
#else
#define IAMS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum iams_status {
  IAMS_OK = 0,
  IAMS_ERR_INVALID_ARGUMENT = 1,
  IAMS_ERR_VALIDATION = 2,
  IAMS_ERR_IO = 3,
  IAMS_ERR_NUMERIC = 4,
  IAMS_ERR_SCORER = 5,
  IAMS_ERR_PROVENANCE = 6,
  IAMS_ERR_MISSING_ARTIFACT = 7,
  IAMS_ERR_TOO_LARGE = 8,
  IAMS_ERR_INTERNAL = 9
} iams_status;

typedef struct iams_model iams_model;
typedef struct iams_design iams_design;
typedef struct iams_fit iams_fit;
typedef struct iams_run iams_run;

IAMS_API const char* iams_version(void);
IAMS_API const char* iams_status_name(iams_status status);

/* Message of the last failure on the calling thread; empty after success. */
IAMS_API const char* iams_last_error(void);

/* Releases strings returned through char** out-parameters. */
IAMS_API void iams_string_free(char* s);

/* Prompt models. */
IAMS_API iams_status iams_model_load(const char* path, iams_model** out);
IAMS_API iams_status iams_model_parse(const char* json_text, iams_model** out);
IAMS_API void iams_model_free(iams_model* model);
IAMS_API iams_status iams_model_subprompt_count(const iams_model* model, uint64_t* out);
/* JSON diagnostics: strata, variable components, subprompt count. */
IAMS_API iams_status iams_model_describe(const iams_model* model, char** out_json);
/* Subprompt keys in enumeration order, one per line. */
IAMS_API iams_status iams_model_list_subprompts(const iams_model* model, char** out_text);

/* Design matrices over the full enumeration. `strata` lists the stratum
   indices eligible for interactions; pass NULL to use every variable
   stratum. */
IAMS_API iams_status iams_design_build(const iams_model* model, const int* strata,
                                       size_t num_strata, int max_order, int repeats,
                                       iams_design** out);
IAMS_API void iams_design_free(iams_design* design);
IAMS_API size_t iams_design_rows(const iams_design* design);
IAMS_API size_t iams_design_cols(const iams_design* design);
IAMS_API iams_status iams_design_value(const iams_design* design, size_t row, size_t col,
                                       uint8_t* out);
IAMS_API iams_status iams_design_label(const iams_design* design, size_t col, char** out);

/* Fits on a dense column-major matrix whose first column is the intercept.
   For logistic fits y must be 0/1. */
IAMS_API iams_status iams_fit_ols(const double* x, size_t rows, size_t cols, const double* y,
                                  iams_fit** out);
IAMS_API iams_status iams_fit_lasso(const double* x, size_t rows, size_t cols, const double* y,
                                    double lambda, iams_fit** out);
IAMS_API iams_status iams_fit_logistic(const double* x, size_t rows, size_t cols,
                                       const double* y, double lambda, iams_fit** out);
IAMS_API void iams_fit_free(iams_fit* fit);
IAMS_API size_t iams_fit_size(const iams_fit* fit);
/* Copies up to `n` values. Inference arrays fail for penalized fits. */
IAMS_API iams_status iams_fit_coefficients(const iams_fit* fit, double* out, size_t n);
IAMS_API iams_status iams_fit_std_errors(const iams_fit* fit, double* out, size_t n);
IAMS_API iams_status iams_fit_p_values(const iams_fit* fit, double* out, size_t n);
IAMS_API iams_status iams_fit_r_squared(const iams_fit* fit, double* out);
IAMS_API iams_status iams_fit_to_json(const iams_fit* fit, char** out_json);

/* Pipeline runs. Options: model, scorer, lambda, grid, max_order, alpha,
   seed. Commands: validate, enumerate, score, design, fit, path, select,
   shapley, report, run. */
IAMS_API iams_status iams_run_open(const char* manifest_path, const char* out_dir,
                                   iams_run** out);
IAMS_API iams_status iams_run_set_option(iams_run* run, const char* name, const char* value);
IAMS_API iams_status iams_run_execute(iams_run* run, const char* command, char** out_json);
IAMS_API void iams_run_free(iams_run* run);

#ifdef __cplusplus
}
#endif

#endif  // IAMS_IAMS_H_
