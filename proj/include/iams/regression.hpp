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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iams/encoding.hpp"
#include "json.hpp"

namespace iams {

// Column metadata carried into fit results. Column 0 is always the
// intercept (a column of ones); order 0 marks it.
struct ColumnInfo {
  std::vector<std::string> labels;
  std::vector<int> orders;

  static ColumnInfo Generic(std::size_t cols);  // "intercept", "x1", "x2", ...
  static ColumnInfo Of(const DesignMatrix& design);
};

Eigen::MatrixXd ToEigen(const DesignMatrix& design);

struct FitResult {
  std::string method;  // "ols", "lasso" or "logistic"
  std::vector<std::string> labels;
  std::vector<int> orders;
  std::vector<double> coefficients;
  // Empty for penalized fits.
  std::vector<double> std_errors;
  std::vector<double> t_stats;
  std::vector<double> p_values;
  std::vector<double> residuals;
  std::vector<double> fitted;
  double sigma2_hat = 0.0;
  double r_squared = 0.0;
  double adj_r_squared = 0.0;
  // Training mean squared error; for logistic fits this slot carries the
  // final penalized objective instead.
  double mse = 0.0;
  double objective = 0.0;
  long dof = 0;
  double lambda = 0.0;
  bool converged = true;
  long sweeps = 0;

  bool has_inference() const { return !p_values.empty(); }
  std::optional<std::size_t> index_of(std::string_view label) const;

  nlohmann::json ToJson() const;
  static FitResult FromJson(const nlohmann::json& doc);
};

// Least squares through a column-pivoted Householder QR. Throws
// Error(kNumeric) naming the dependent columns when X is rank deficient.
FitResult FitOls(const Eigen::MatrixXd& x, std::span<const double> y,
                 const ColumnInfo& columns);
FitResult FitOls(const DesignMatrix& design, std::span<const double> y);

struct LassoOptions {
  double tolerance = 1e-8;  // max |coefficient change| in a sweep
  long max_sweeps = 100000;
};

// Minimizes RSS / (2 rows) + lambda * sum |beta_j| over j >= 1 by cyclic
// coordinate descent. The intercept (column 0) is not penalized and columns
// are not standardized.
FitResult FitLasso(const Eigen::MatrixXd& x, std::span<const double> y,
                   double lambda, const ColumnInfo& columns,
                   const LassoOptions& options = {},
                   std::span<const double> warm_start = {});
FitResult FitLasso(const DesignMatrix& design, std::span<const double> y,
                   double lambda, const LassoOptions& options = {});

double LassoObjective(const Eigen::MatrixXd& x, std::span<const double> y,
                      std::span<const double> beta, double lambda);
// Smallest lambda at which every penalized coefficient is zero.
double LassoLambdaMax(const Eigen::MatrixXd& x, std::span<const double> y);

struct KktReport {
  bool ok = true;
  double max_violation = 0.0;
  std::size_t worst_column = 0;
};

// Checks the optimality conditions of a lasso solution directly from the
// data: |X_j'r/n| <= lambda + tol for zero coefficients, X_j'r/n equal to
// lambda * sign(beta_j) within tol otherwise, and a zero-mean residual for
// the intercept.
KktReport CheckLassoKkt(const Eigen::MatrixXd& x, std::span<const double> y,
                        std::span<const double> beta, double lambda,
                        double tolerance = 1e-6);

struct LassoPath {
  std::vector<std::string> labels;
  std::vector<int> orders;
  std::vector<double> lambdas;
  std::vector<std::vector<double>> coefficients;
  std::vector<double> mse;
  std::vector<double> norm_total;               // non-intercept L2 norm
  std::vector<std::vector<double>> norm_by_order;  // [lambda][order - 1]
  std::vector<bool> converged;
  std::vector<long> sweeps;

  int max_order() const;
  void WriteCsv(std::ostream& out) const;
  static LassoPath ReadCsv(std::istream& in);
};

// Fits every grid point in ascending order, warm-starting each from the
// previous solution. The grid must be non-empty, strictly increasing and
// non-negative.
LassoPath FitLassoPath(const Eigen::MatrixXd& x, std::span<const double> y,
                       std::span<const double> grid, const ColumnInfo& columns,
                       const LassoOptions& options = {});
LassoPath FitLassoPath(const DesignMatrix& design, std::span<const double> y,
                       std::span<const double> grid,
                       const LassoOptions& options = {});

// Parses "lo:hi:step" into lo, lo + step, ... <= hi (+ half a step of slack).
std::vector<double> ParseGrid(std::string_view spec);

struct LogisticOptions {
  double tolerance = 1e-10;  // objective decrease per outer pass
  long max_passes = 500;
};

// Minimizes mean negative log-likelihood + lambda * sum |beta_j| (j >= 1)
// with a proximal Newton scheme. At lambda = 0 the result carries Wald
// standard errors and normal p-values.
FitResult FitLogistic(const Eigen::MatrixXd& x, std::span<const double> y,
                      double lambda, const ColumnInfo& columns,
                      const LogisticOptions& options = {});
FitResult FitLogistic(const DesignMatrix& design, std::span<const double> y,
                      double lambda, const LogisticOptions& options = {});

double LogisticObjective(const Eigen::MatrixXd& x, std::span<const double> y,
                         std::span<const double> beta, double lambda);
// Gradient of the mean negative log-likelihood.
std::vector<double> LogisticGradient(const Eigen::MatrixXd& x,
                                     std::span<const double> y,
                                     std::span<const double> beta);

double Pearson(std::span<const double> a, std::span<const double> b);

struct QqData {
  std::vector<double> theoretical;
  std::vector<double> standardized;  // sorted ascending
  double slope = 0.0;
  double intercept = 0.0;
};

QqData MakeQqData(std::span<const double> residuals);

}  // namespace iams
