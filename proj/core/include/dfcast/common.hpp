// Copyright 2026 The dfcast Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DFCAST_COMMON_HPP_
#define DFCAST_COMMON_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace dfcast {

// Predictions live in [0,1]; outcomes are 0 or 1. Losses take values in
// [0, +inf], with +inf represented by the IEEE infinity.
using Prediction = double;
using Outcome = int;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline bool is_valid_prediction(double gamma) {
  return std::isfinite(gamma) && gamma >= 0.0 && gamma <= 1.0;
}
inline bool is_valid_outcome(int omega) { return omega == 0 || omega == 1; }

// Invalid inputs at an API boundary (malformed weights, bad indices, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A learning rate above the loss's largest certified mixability constant.
class MixabilityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A condition the algorithm guarantees failed to hold numerically. These are
// reported, never silently absorbed.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Difference of two loss values under the extended-value convention:
// inf - inf := 0, finite - inf = -inf, inf - finite = +inf.
inline double loss_diff(double a, double b) {
  if (std::isinf(a) && std::isinf(b)) return 0.0;
  return a - b;
}

// p * x with 0 * inf := 0, as in expected-loss sums.
inline double prod_zero_inf(double p, double x) {
  if (p == 0.0) return 0.0;
  return p * x;
}

// ln(sum_i e^{x_i}) with the usual max shift; -inf entries are allowed and an
// all -inf input yields -inf.
inline double log_sum_exp(std::span<const double> xs) {
  double m = -kInf;
  for (double x : xs) m = std::max(m, x);
  if (std::isinf(m) && m < 0) return -kInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace dfcast

#endif  // DFCAST_COMMON_HPP_
