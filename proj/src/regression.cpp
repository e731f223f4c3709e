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

#include "iams/regression.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "iams/csv.hpp"
#include "iams/error.hpp"
#include "iams/stats.hpp"

namespace iams {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::Map<const VectorXd> AsVector(std::span<const double> v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

std::vector<double> ToStd(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void CheckShapes(const MatrixXd& x, std::span<const double> y, const ColumnInfo& columns) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    Fail(ErrorCode::kInvalidArgument,
         "design has " + std::to_string(x.rows()) + " rows but y has " +
             std::to_string(y.size()) + " entries");
  }
  if (x.cols() == 0) Fail(ErrorCode::kInvalidArgument, "design has no columns");
  if (columns.labels.size() != static_cast<std::size_t>(x.cols()) ||
      columns.orders.size() != static_cast<std::size_t>(x.cols())) {
    Fail(ErrorCode::kInvalidArgument, "column metadata does not match the design");
  }
  for (double v : y) {
    if (!std::isfinite(v)) Fail(ErrorCode::kInvalidArgument, "response has non-finite values");
  }
}

void CheckInterceptColumn(const MatrixXd& x) {
  if (!(x.col(0).array() == 1.0).all()) {
    Fail(ErrorCode::kInvalidArgument, "column 0 must be an intercept column of ones");
  }
}

void FillFitStatistics(FitResult& fit, const MatrixXd& x, std::span<const double> y,
                       const VectorXd& beta) {
  const VectorXd yv = AsVector(y);
  const VectorXd fitted = x * beta;
  const VectorXd resid = yv - fitted;
  const double n = static_cast<double>(y.size());
  const double rss = resid.squaredNorm();
  const double tss = (yv.array() - yv.mean()).matrix().squaredNorm();
  fit.coefficients = ToStd(beta);
  fit.fitted = ToStd(fitted);
  fit.residuals = ToStd(resid);
  fit.mse = rss / n;
  fit.dof = static_cast<long>(x.rows()) - static_cast<long>(x.cols());
  fit.sigma2_hat = fit.dof > 0 ? rss / fit.dof : std::numeric_limits<double>::quiet_NaN();
  fit.r_squared = tss > 0.0 ? 1.0 - rss / tss : (rss == 0.0 ? 1.0 : 0.0);
  fit.adj_r_squared =
      fit.dof > 0 ? 1.0 - (1.0 - fit.r_squared) * (n - 1.0) / fit.dof
                  : std::numeric_limits<double>::quiet_NaN();
}

double SoftThreshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

// Centered covariance form of the lasso problem; the intercept is profiled
// out, so coordinates 1..p-1 are the penalized columns.
struct LassoProblem {
  Eigen::Index n = 0;
  Eigen::Index p = 0;  // penalized columns
  VectorXd x_mean;     // per penalized column
  double y_mean = 0.0;
  double y_var = 0.0;  // sum (y - ybar)^2 / n
  MatrixXd gram;       // centered X'X / n
  VectorXd xty;        // centered X'y / n

  LassoProblem(const MatrixXd& x, std::span<const double> y) {
    CheckInterceptColumn(x);
    n = x.rows();
    p = x.cols() - 1;
    const VectorXd yv = AsVector(y);
    y_mean = yv.mean();
    const VectorXd yc = yv.array() - y_mean;
    y_var = yc.squaredNorm() / n;
    const auto xp = x.rightCols(p);
    x_mean = xp.colwise().mean().transpose();
    gram.noalias() = xp.transpose() * xp;
    gram /= static_cast<double>(n);
    gram.noalias() -= x_mean * x_mean.transpose();
    xty.noalias() = xp.transpose() * yc;
    xty /= static_cast<double>(n);
  }

  double Objective(const VectorXd& beta, double lambda) const {
    return 0.5 * (y_var - 2.0 * xty.dot(beta) + beta.dot(gram * beta)) +
           lambda * beta.lpNorm<1>();
  }
};

struct LassoState {
  VectorXd beta;
  bool converged = false;
  long sweeps = 0;
};

// Cyclic coordinate descent with gradient updates. Alternates full sweeps
// with sweeps restricted to the non-zero set until a full sweep moves no
// coefficient by more than the tolerance.
LassoState SolveLasso(const LassoProblem& prob, double lambda, VectorXd beta,
                      const LassoOptions& options) {
  const Eigen::Index p = prob.p;
  VectorXd grad = prob.xty - prob.gram * beta;  // X_j'r / n
  LassoState state;
  std::vector<Eigen::Index> active;
  auto sweep = [&](bool full) {
    double max_delta = 0.0;
    auto update = [&](Eigen::Index j) {
      const double a = prob.gram(j, j);
      if (a <= 0.0) {
        if (beta(j) != 0.0) {
          grad.noalias() += prob.gram.col(j) * beta(j);
          max_delta = std::max(max_delta, std::fabs(beta(j)));
          beta(j) = 0.0;
        }
        return;
      }
      const double old = beta(j);
      const double updated = SoftThreshold(grad(j) + a * old, lambda) / a;
      const double delta = updated - old;
      if (delta != 0.0) {
        beta(j) = updated;
        grad.noalias() -= prob.gram.col(j) * delta;
        max_delta = std::max(max_delta, std::fabs(delta));
      }
    };
    if (full) {
      for (Eigen::Index j = 0; j < p; ++j) update(j);
    } else {
      for (Eigen::Index j : active) update(j);
    }
    ++state.sweeps;
    return max_delta;
  };

#ifndef NDEBUG
  double last_objective = prob.Objective(beta, lambda);
  auto check_descent = [&] {
    const double obj = prob.Objective(beta, lambda);
    assert(obj <= last_objective + 1e-12 * (1.0 + std::fabs(last_objective)));
    last_objective = obj;
  };
#else
  auto check_descent = [] {};
#endif

  while (state.sweeps < options.max_sweeps) {
    const double full_delta = sweep(true);
    check_descent();
    if (full_delta < options.tolerance) {
      state.converged = true;
      break;
    }
    active.clear();
    for (Eigen::Index j = 0; j < p; ++j) {
      if (beta(j) != 0.0) active.push_back(j);
    }
    while (state.sweeps < options.max_sweeps) {
      const double delta = sweep(false);
      check_descent();
      if (delta < options.tolerance) break;
    }
  }
  state.beta = std::move(beta);
  return state;
}

FitResult AssembleLasso(const MatrixXd& x, std::span<const double> y,
                        const LassoProblem& prob, const LassoState& state,
                        double lambda, const ColumnInfo& columns) {
  VectorXd beta(prob.p + 1);
  beta(0) = prob.y_mean - prob.x_mean.dot(state.beta);
  beta.tail(prob.p) = state.beta;
  FitResult fit;
  fit.method = "lasso";
  fit.labels = columns.labels;
  fit.orders = columns.orders;
  FillFitStatistics(fit, x, y, beta);
  fit.lambda = lambda;
  fit.converged = state.converged;
  fit.sweeps = state.sweeps;
  fit.objective = LassoObjective(x, y, fit.coefficients, lambda);
  return fit;
}

}  // namespace

ColumnInfo ColumnInfo::Generic(std::size_t cols) {
  ColumnInfo info;
  for (std::size_t c = 0; c < cols; ++c) {
    info.labels.push_back(c == 0 ? std::string(kInterceptLabel) : "x" + std::to_string(c));
    info.orders.push_back(c == 0 ? 0 : 1);
  }
  return info;
}

ColumnInfo ColumnInfo::Of(const DesignMatrix& design) {
  return {design.labels(), design.orders()};
}

Eigen::MatrixXd ToEigen(const DesignMatrix& design) {
  MatrixXd x(design.rows(), design.cols());
  for (std::size_t c = 0; c < design.cols(); ++c) {
    const auto col = design.column(c);
    for (std::size_t r = 0; r < design.rows(); ++r) x(r, c) = col[r];
  }
  return x;
}

std::optional<std::size_t> FitResult::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return i;
  }
  return std::nullopt;
}

nlohmann::json FitResult::ToJson() const {
  nlohmann::json coef = nlohmann::json::object();
  nlohmann::json se = nlohmann::json::object();
  nlohmann::json t = nlohmann::json::object();
  nlohmann::json p = nlohmann::json::object();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    coef[labels[i]] = coefficients[i];
    if (has_inference()) {
      se[labels[i]] = std_errors[i];
      t[labels[i]] = t_stats[i];
      p[labels[i]] = p_values[i];
    }
  }
  nlohmann::json doc = {
      {"method", method},           {"labels", labels},
      {"orders", orders},           {"coefficients", coef},
      {"residuals", residuals},     {"fitted", fitted},
      {"sigma2_hat", sigma2_hat},   {"r_squared", r_squared},
      {"adj_r_squared", adj_r_squared}, {"mse", mse},
      {"objective", objective},     {"dof", dof},
      {"lambda", lambda},           {"converged", converged},
      {"sweeps", sweeps}};
  if (has_inference()) {
    doc["std_errors"] = se;
    doc["t_stats"] = t;
    doc["p_values"] = p;
  }
  return doc;
}

FitResult FitResult::FromJson(const nlohmann::json& doc) {
  try {
    FitResult fit;
    fit.method = doc.at("method").get<std::string>();
    fit.labels = doc.at("labels").get<std::vector<std::string>>();
    fit.orders = doc.at("orders").get<std::vector<int>>();
    auto keyed = [&](const char* field, std::vector<double>& out) {
      const auto& obj = doc.at(field);
      out.clear();
      for (const auto& label : fit.labels) {
        const auto& v = obj.at(label);
        out.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                  : v.get<double>());
      }
    };
    keyed("coefficients", fit.coefficients);
    if (doc.contains("p_values")) {
      keyed("std_errors", fit.std_errors);
      keyed("t_stats", fit.t_stats);
      keyed("p_values", fit.p_values);
    }
    auto number = [&](const char* field) {
      const auto& v = doc.at(field);
      return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    fit.residuals = doc.at("residuals").get<std::vector<double>>();
    fit.fitted = doc.at("fitted").get<std::vector<double>>();
    fit.sigma2_hat = number("sigma2_hat");
    fit.r_squared = number("r_squared");
    fit.adj_r_squared = number("adj_r_squared");
    fit.mse = number("mse");
    fit.objective = number("objective");
    fit.dof = doc.at("dof").get<long>();
    fit.lambda = number("lambda");
    fit.converged = doc.at("converged").get<bool>();
    fit.sweeps = doc.at("sweeps").get<long>();
    return fit;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kValidation, std::string("malformed fit result: ") + e.what());
  }
}

FitResult FitOls(const MatrixXd& x, std::span<const double> y, const ColumnInfo& columns) {
  CheckShapes(x, y, columns);
  if (x.rows() <= x.cols()) {
    Fail(ErrorCode::kNumeric, "OLS needs more rows than columns (" +
                                  std::to_string(x.rows()) + " rows, " +
                                  std::to_string(x.cols()) + " columns)");
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  const Eigen::Index p = x.cols();
  if (qr.rank() < p) {
    std::string names;
    for (Eigen::Index i = qr.rank(); i < p; ++i) {
      if (!names.empty()) names += ", ";
      names += columns.labels[qr.colsPermutation().indices()(i)];
    }
    Fail(ErrorCode::kNumeric, "design is rank deficient (rank " +
                                  std::to_string(qr.rank()) + " of " +
                                  std::to_string(p) + "); dependent columns: " + names);
  }
  const VectorXd beta = qr.solve(AsVector(y).eval());

  FitResult fit;
  fit.method = "ols";
  fit.labels = columns.labels;
  fit.orders = columns.orders;
  FillFitStatistics(fit, x, y, beta);
  fit.objective = 0.5 * fit.mse;

  // (X'X)^-1 = P R^-1 R^-T P'.
  const MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(p, p));
  const VectorXd diag_perm = r_inv.rowwise().squaredNorm();
  fit.std_errors.assign(p, 0.0);
  fit.t_stats.assign(p, 0.0);
  fit.p_values.assign(p, 0.0);
  for (Eigen::Index i = 0; i < p; ++i) {
    const Eigen::Index col = qr.colsPermutation().indices()(i);
    const double se = std::sqrt(fit.sigma2_hat * diag_perm(i));
    const double b = fit.coefficients[col];
    double t;
    if (se > 0.0) {
      t = b / se;
    } else {
      t = b == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), b);
    }
    fit.std_errors[col] = se;
    fit.t_stats[col] = t;
    fit.p_values[col] = stats::StudentTTwoSidedP(t, static_cast<double>(fit.dof));
  }
  return fit;
}

FitResult FitOls(const DesignMatrix& design, std::span<const double> y) {
  return FitOls(ToEigen(design), y, ColumnInfo::Of(design));
}

double LassoObjective(const MatrixXd& x, std::span<const double> y,
                      std::span<const double> beta, double lambda) {
  const VectorXd b = AsVector(beta);
  const double rss = (AsVector(y) - x * b).squaredNorm();
  return rss / (2.0 * x.rows()) + lambda * b.tail(b.size() - 1).lpNorm<1>();
}

double LassoLambdaMax(const MatrixXd& x, std::span<const double> y) {
  const VectorXd yc = AsVector(y).array() - AsVector(y).mean();
  if (x.cols() < 2) return 0.0;
  return (x.rightCols(x.cols() - 1).transpose() * yc).cwiseAbs().maxCoeff() / x.rows();
}

FitResult FitLasso(const MatrixXd& x, std::span<const double> y, double lambda,
                   const ColumnInfo& columns, const LassoOptions& options,
                   std::span<const double> warm_start) {
  CheckShapes(x, y, columns);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    Fail(ErrorCode::kInvalidArgument, "lambda must be a finite value >= 0");
  }
  const LassoProblem prob(x, y);
  VectorXd start = VectorXd::Zero(prob.p);
  if (!warm_start.empty()) {
    if (warm_start.size() != static_cast<std::size_t>(x.cols())) {
      Fail(ErrorCode::kInvalidArgument, "warm start has the wrong length");
    }
    start = AsVector(warm_start).tail(prob.p);
  }
  const LassoState state = SolveLasso(prob, lambda, std::move(start), options);
  return AssembleLasso(x, y, prob, state, lambda, columns);
}

FitResult FitLasso(const DesignMatrix& design, std::span<const double> y, double lambda,
                   const LassoOptions& options) {
  return FitLasso(ToEigen(design), y, lambda, ColumnInfo::Of(design), options);
}

KktReport CheckLassoKkt(const MatrixXd& x, std::span<const double> y,
                        std::span<const double> beta, double lambda, double tolerance) {
  const VectorXd b = AsVector(beta);
  const VectorXd resid = AsVector(y) - x * b;
  const VectorXd grad = x.transpose() * resid / static_cast<double>(x.rows());
  KktReport report;
  auto record = [&](std::size_t j, double violation) {
    if (violation > report.max_violation) {
      report.max_violation = violation;
      report.worst_column = j;
    }
  };
  record(0, std::fabs(grad(0)));
  for (Eigen::Index j = 1; j < b.size(); ++j) {
    if (b(j) == 0.0) {
      record(j, std::max(0.0, std::fabs(grad(j)) - lambda));
    } else {
      record(j, std::fabs(grad(j) - lambda * (b(j) > 0 ? 1.0 : -1.0)));
    }
  }
  report.ok = report.max_violation <= tolerance;
  return report;
}

int LassoPath::max_order() const {
  int g = 0;
  for (int o : orders) g = std::max(g, o);
  return g;
}

LassoPath FitLassoPath(const MatrixXd& x, std::span<const double> y,
                       std::span<const double> grid, const ColumnInfo& columns,
                       const LassoOptions& options) {
  CheckShapes(x, y, columns);
  if (grid.empty()) Fail(ErrorCode::kInvalidArgument, "lambda grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0) || !std::isfinite(grid[i])) {
      Fail(ErrorCode::kInvalidArgument,
           "lambda grid value " + csv::FormatDouble(grid[i]) + " is not >= 0");
    }
    if (i && !(grid[i] > grid[i - 1])) {
      Fail(ErrorCode::kInvalidArgument, "lambda grid must be strictly increasing");
    }
  }
  const LassoProblem prob(x, y);
  LassoPath path;
  path.labels = columns.labels;
  path.orders = columns.orders;
  const int g = path.max_order();
  VectorXd beta = VectorXd::Zero(prob.p);
  for (double lambda : grid) {
    LassoState state;
    try {
      state = SolveLasso(prob, lambda, beta, options);
    } catch (const Error& e) {
      Fail(e.code(), "lasso fit at lambda " + csv::FormatDouble(lambda) + ": " + e.what());
    }
    beta = state.beta;
    const FitResult fit = AssembleLasso(x, y, prob, state, lambda, columns);
    std::vector<double> by_order(std::max(g, 0), 0.0);
    double total = 0.0;
    for (std::size_t j = 1; j < fit.coefficients.size(); ++j) {
      const double sq = fit.coefficients[j] * fit.coefficients[j];
      total += sq;
      if (columns.orders[j] >= 1) by_order[columns.orders[j] - 1] += sq;
    }
    for (double& v : by_order) v = std::sqrt(v);
    path.lambdas.push_back(lambda);
    path.coefficients.push_back(fit.coefficients);
    path.mse.push_back(fit.mse);
    path.norm_total.push_back(std::sqrt(total));
    path.norm_by_order.push_back(std::move(by_order));
    path.converged.push_back(state.converged);
    path.sweeps.push_back(state.sweeps);
  }
  return path;
}

LassoPath FitLassoPath(const DesignMatrix& design, std::span<const double> y,
                       std::span<const double> grid, const LassoOptions& options) {
  return FitLassoPath(ToEigen(design), y, grid, ColumnInfo::Of(design), options);
}

void LassoPath::WriteCsv(std::ostream& out) const {
  std::vector<std::string> header{"lambda", "mse", "norm_total"};
  const int g = max_order();
  for (int o = 1; o <= g; ++o) header.push_back("norm_order_" + std::to_string(o));
  for (const auto& label : labels) header.push_back("coef:" + label);
  csv::WriteRow(out, header);
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    std::vector<std::string> row{csv::FormatDouble(lambdas[i]), csv::FormatDouble(mse[i]),
                                 csv::FormatDouble(norm_total[i])};
    for (double v : norm_by_order[i]) row.push_back(csv::FormatDouble(v));
    for (double v : coefficients[i]) row.push_back(csv::FormatDouble(v));
    csv::WriteRow(out, row);
  }
}

LassoPath LassoPath::ReadCsv(std::istream& in) {
  const csv::Table table = csv::Read(in);
  LassoPath path;
  int g = 0;
  std::vector<std::size_t> coef_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const std::string& h = table.header[c];
    if (h.rfind("norm_order_", 0) == 0) ++g;
    if (h.rfind("coef:", 0) == 0) {
      path.labels.push_back(h.substr(5));
      coef_cols.push_back(c);
    }
  }
  // Orders are recovered from the label arity.
  for (const auto& label : path.labels) {
    path.orders.push_back(label == kInterceptLabel
                              ? 0
                              : 1 + static_cast<int>(std::count(label.begin(), label.end(), ':')));
  }
  auto num = [](const std::string& s) { return std::stod(s); };
  for (const auto& row : table.rows) {
    path.lambdas.push_back(num(row[table.column("lambda")]));
    path.mse.push_back(num(row[table.column("mse")]));
    path.norm_total.push_back(num(row[table.column("norm_total")]));
    std::vector<double> by_order;
    for (int o = 1; o <= g; ++o) {
      by_order.push_back(num(row[table.column("norm_order_" + std::to_string(o))]));
    }
    path.norm_by_order.push_back(std::move(by_order));
    std::vector<double> coef;
    for (std::size_t c : coef_cols) coef.push_back(num(row[c]));
    path.coefficients.push_back(std::move(coef));
    path.converged.push_back(true);
    path.sweeps.push_back(0);
  }
  return path;
}

std::vector<double> ParseGrid(std::string_view spec) {
  auto fail = [&] {
    Fail(ErrorCode::kInvalidArgument,
         "grid '" + std::string(spec) + "' is not of the form lo:hi:step");
  };
  const std::size_t a = spec.find(':');
  if (a == std::string_view::npos) fail();
  const std::size_t b = spec.find(':', a + 1);
  if (b == std::string_view::npos) fail();
  double lo, hi, step;
  try {
    lo = std::stod(std::string(spec.substr(0, a)));
    hi = std::stod(std::string(spec.substr(a + 1, b - a - 1)));
    step = std::stod(std::string(spec.substr(b + 1)));
  } catch (const std::exception&) {
    fail();
  }
  if (!(step > 0.0) || hi < lo) fail();
  std::vector<double> grid;
  const long count = static_cast<long>(std::floor((hi - lo) / step + 0.5)) + 1;
  for (long i = 0; i < count; ++i) grid.push_back(lo + step * static_cast<double>(i));
  return grid;
}

// --- logistic -------------------------------------------------------------

double LogisticObjective(const MatrixXd& x, std::span<const double> y,
                         std::span<const double> beta, double lambda) {
  const VectorXd eta = x * AsVector(beta);
  const auto yv = AsVector(y);
  double nll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = eta(i);
    // log(1 + exp(e)) without overflow.
    const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    nll += softplus - yv(i) * e;
  }
  const VectorXd b = AsVector(beta);
  return nll / x.rows() + lambda * b.tail(b.size() - 1).lpNorm<1>();
}

namespace {

double Sigmoid(double e) {
  if (e >= 0) return 1.0 / (1.0 + std::exp(-e));
  const double z = std::exp(e);
  return z / (1.0 + z);
}

VectorXd LogisticGradientVec(const MatrixXd& x, const Eigen::Ref<const VectorXd>& y,
                             const VectorXd& beta) {
  const VectorXd eta = x * beta;
  VectorXd diff(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) diff(i) = Sigmoid(eta(i)) - y(i);
  return x.transpose() * diff / static_cast<double>(x.rows());
}

// Minimizes g'd + d'Hd/2 + lambda * |beta + d|_1 (penalty on j >= 1) by
// coordinate descent over u = beta + d.
VectorXd ProximalNewtonDirection(const MatrixXd& h, const VectorXd& g,
                                 const VectorXd& beta, double lambda) {
  const Eigen::Index p = beta.size();
  VectorXd u = beta;
  VectorXd hd = VectorXd::Zero(p);  // H (u - beta)
  for (int sweep = 0; sweep < 100000; ++sweep) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double a = std::max(h(j, j), 1e-12);
      const double r = g(j) + hd(j) - h(j, j) * (u(j) - beta(j));
      const double z = a * beta(j) - r;
      const double updated = j == 0 ? z / a : SoftThreshold(z, lambda) / a;
      const double delta = updated - u(j);
      if (delta != 0.0) {
        u(j) = updated;
        hd.noalias() += h.col(j) * delta;
        max_delta = std::max(max_delta, std::fabs(delta));
      }
    }
    if (max_delta < 1e-13) break;
  }
  return u - beta;
}

}  // namespace

std::vector<double> LogisticGradient(const MatrixXd& x, std::span<const double> y,
                                     std::span<const double> beta) {
  return ToStd(LogisticGradientVec(x, AsVector(y), AsVector(beta)));
}

FitResult FitLogistic(const MatrixXd& x, std::span<const double> y, double lambda,
                      const ColumnInfo& columns, const LogisticOptions& options) {
  CheckShapes(x, y, columns);
  CheckInterceptColumn(x);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    Fail(ErrorCode::kInvalidArgument, "lambda must be a finite value >= 0");
  }
  for (double v : y) {
    if (v != 0.0 && v != 1.0) Fail(ErrorCode::kInvalidArgument, "logistic response must be 0/1");
  }
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const auto yv = AsVector(y);
  VectorXd beta = VectorXd::Zero(p);
  double objective = LogisticObjective(x, y, ToStd(beta), lambda);
  auto penalty = [&](const VectorXd& b) { return lambda * b.tail(p - 1).lpNorm<1>(); };

  FitResult fit;
  fit.converged = false;
  long pass = 0;
  MatrixXd h(p, p);
  for (; pass < options.max_passes; ++pass) {
    const VectorXd eta = x * beta;
    VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pr = Sigmoid(eta(i));
      w(i) = pr * (1.0 - pr);
    }
    const VectorXd g = LogisticGradientVec(x, yv, beta);
    h.noalias() = x.transpose() * w.asDiagonal() * x;
    h /= static_cast<double>(n);

    VectorXd d;
    if (lambda == 0.0) {
      d = -h.ldlt().solve(g);
      if (!d.allFinite()) d = ProximalNewtonDirection(h, g, beta, 0.0);
    } else {
      d = ProximalNewtonDirection(h, g, beta, lambda);
    }
    const double predicted = g.dot(d) + penalty(beta + d) - penalty(beta);
    if (!(predicted < 0.0)) {
      fit.converged = true;
      break;
    }
    double step = 1.0;
    double trial = objective;
    VectorXd candidate;
    for (int halving = 0; halving < 60; ++halving) {
      candidate = beta + step * d;
      trial = LogisticObjective(x, y, ToStd(candidate), lambda);
      if (trial <= objective + 0.25 * step * predicted) break;
      step *= 0.5;
    }
    if (!(trial <= objective)) {
      fit.converged = true;
      break;
    }
    const double decrease = objective - trial;
    beta = std::move(candidate);
    objective = trial;
    if (decrease < options.tolerance) {
      ++pass;
      fit.converged = true;
      break;
    }
  }

  fit.method = "logistic";
  fit.labels = columns.labels;
  fit.orders = columns.orders;
  fit.coefficients = ToStd(beta);
  const VectorXd eta = x * beta;
  fit.fitted.resize(n);
  fit.residuals.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    fit.fitted[i] = Sigmoid(eta(i));
    fit.residuals[i] = yv(i) - fit.fitted[i];
  }
  fit.dof = static_cast<long>(n - p);
  fit.lambda = lambda;
  fit.sweeps = pass;
  fit.objective = objective;
  fit.mse = objective;
  fit.sigma2_hat = std::numeric_limits<double>::quiet_NaN();
  fit.r_squared = std::numeric_limits<double>::quiet_NaN();
  fit.adj_r_squared = std::numeric_limits<double>::quiet_NaN();

  if (lambda == 0.0) {
    VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w(i) = fit.fitted[i] * (1.0 - fit.fitted[i]);
    const MatrixXd info = x.transpose() * w.asDiagonal() * x;
    Eigen::LDLT<MatrixXd> ldlt(info);
    const MatrixXd cov = ldlt.solve(MatrixXd::Identity(p, p));
    if (ldlt.info() == Eigen::Success && cov.allFinite()) {
      for (Eigen::Index j = 0; j < p; ++j) {
        const double se = std::sqrt(std::max(cov(j, j), 0.0));
        const double z = se > 0 ? beta(j) / se : 0.0;
        fit.std_errors.push_back(se);
        fit.t_stats.push_back(z);
        fit.p_values.push_back(2.0 * (1.0 - stats::NormalCdf(std::fabs(z))));
      }
    }
  }
  return fit;
}

FitResult FitLogistic(const DesignMatrix& design, std::span<const double> y, double lambda,
                      const LogisticOptions& options) {
  return FitLogistic(ToEigen(design), y, lambda, ColumnInfo::Of(design), options);
}

double Pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    Fail(ErrorCode::kInvalidArgument, "pearson needs vectors of equal length");
  }
  if (a.size() < 2) Fail(ErrorCode::kInvalidArgument, "pearson needs at least 2 points");
  const double ma = stats::Mean(a);
  const double mb = stats::Mean(b);
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double da = a[i] - ma;
    const long double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0 || sbb == 0) {
    Fail(ErrorCode::kNumeric, "pearson is undefined for a zero-variance vector");
  }
  const double r = static_cast<double>(sab / std::sqrt(saa * sbb));
  return std::clamp(r, -1.0, 1.0);
}

QqData MakeQqData(std::span<const double> residuals) {
  if (residuals.size() < 3) Fail(ErrorCode::kInvalidArgument, "QQ data needs >= 3 residuals");
  const double mean = stats::Mean(residuals);
  const double sd = std::sqrt(stats::Variance(residuals));
  if (!(sd > 0.0)) Fail(ErrorCode::kNumeric, "QQ data needs non-constant residuals");
  QqData qq;
  const std::size_t n = residuals.size();
  for (double r : residuals) qq.standardized.push_back((r - mean) / sd);
  std::sort(qq.standardized.begin(), qq.standardized.end());
  for (std::size_t i = 0; i < n; ++i) {
    qq.theoretical.push_back(
        stats::NormalQuantile((static_cast<double>(i) + 0.5) / static_cast<double>(n)));
  }
  const double mx = stats::Mean(qq.theoretical);
  const double my = stats::Mean(qq.standardized);
  long double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (qq.theoretical[i] - mx) * (qq.standardized[i] - my);
    sxx += (qq.theoretical[i] - mx) * (qq.theoretical[i] - mx);
  }
  qq.slope = static_cast<double>(sxy / sxx);
  qq.intercept = my - qq.slope * mx;
  return qq;
}

}  // namespace iams
