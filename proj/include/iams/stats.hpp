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

#include <span>

namespace iams::stats {

// Regularized incomplete beta I_x(a, b), continued fraction (modified Lentz)
// to relative tolerance 1e-12.
double IncompleteBeta(double a, double b, double x);

double StudentTCdf(double t, double dof);
// P(|T| > |t|) for T ~ t(dof).
double StudentTTwoSidedP(double t, double dof);

double NormalCdf(double z);
// Inverse standard normal CDF for p in (0, 1).
double NormalQuantile(double p);

double Mean(std::span<const double> v);
// Sample variance with n - 1 denominator.
double Variance(std::span<const double> v);

}  // namespace iams::stats
