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
//
// Test-only oracles.  Everything here recomputes quantities from first
// principles (definitions and long products) and stays independent of the
// code paths under test.

#ifndef DFCAST_TESTS_ORACLES_HPP_
#define DFCAST_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "dfcast/common.hpp"
#include "dfcast/engine.hpp"
#include "dfcast/loss.hpp"

namespace dfcast::oracles {

// Expected loss of predicting `pred` under belief `belief`, with 0*inf = 0.
inline double expected_loss(const LossFn& loss, double belief, double pred) {
  return prod_zero_inf(belief, loss(pred, 1)) +
         prod_zero_inf(1.0 - belief, loss(pred, 0));
}

struct ChordViolation {
  double gamma_a = 0.0;
  double gamma_b = 0.0;
  double margin = 0.0;  // most negative domination slack found
};

// Brute-force chord test for convexity of the exponentiated image.  Requires
// the image curve to be monotone (first coordinate one way, second the other),
// which holds for every loss exercised in the tests; domination of a chord
// midpoint is then decided against the exact curve by bisecting the first
// coordinate to machine precision.  Returns the worst chord if its slack is
// below -tol.
inline std::optional<ChordViolation> find_chord_violation(const LossFn& loss,
                                                          double eta,
                                                          int grid_n,
                                                          double tol = 1e-9) {
  std::vector<double> u(grid_n), v(grid_n);
  for (int i = 0; i < grid_n; ++i) {
    const double g = static_cast<double>(i) / (grid_n - 1);
    u[i] = std::exp(-eta * loss(g, 0));
    v[i] = std::exp(-eta * loss(g, 1));
  }
  bool u_desc = u.front() >= u.back();
  const auto u_at = [&](double g) {
    return std::exp(-eta * loss(g, 0));
  };
  const auto v_at = [&](double g) {
    return std::exp(-eta * loss(g, 1));
  };
  // The exact curve height above first-coordinate value q.
  const auto curve_v = [&](double q) {
    double lo = 0.0, hi = 1.0;  // u(lo) is the larger end
    if (!u_desc) std::swap(lo, hi);
    if (q >= u_at(lo)) return v_at(lo);
    if (q <= u_at(hi)) return v_at(hi);
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (u_at(mid) >= q ? lo : hi) = mid;
    }
    return v_at(0.5 * (lo + hi));
  };

  ChordViolation worst{0.0, 0.0, kInf};
  for (int i = 0; i < grid_n; ++i) {
    for (int j = i + 1; j < grid_n; ++j) {
      const double qu = 0.5 * (u[i] + u[j]);
      const double qv = 0.5 * (v[i] + v[j]);
      const double margin = curve_v(qu) - qv;
      if (margin < worst.margin) {
        worst = {static_cast<double>(i) / (grid_n - 1),
                 static_cast<double>(j) / (grid_n - 1), margin};
      }
    }
  }
  if (worst.margin < -tol) return worst;
  return std::nullopt;
}

// The mixture value after a played prefix, straight from its definition as an
// average of per-expert full-history products.  Only for short games.
inline double direct_mixture(
    const std::vector<std::vector<ExpertAdvice>>& advice_history,
    const std::vector<double>& pis, const std::vector<int>& omegas) {
  const size_t horizon = advice_history.size();
  if (horizon == 0) return 1.0;
  const size_t n = advice_history.front().size();
  double total = 0.0;
  for (size_t expert = 0; expert < n; ++expert) {
    double log_prod = 0.0;
    for (size_t t = 0; t < horizon; ++t) {
      const ExpertAdvice a = advice_history[t][expert].resolved();
      log_prod += a.eta * loss_diff(a.loss(pis[t], omegas[t]),
                                    a.loss(*a.prediction, omegas[t]));
    }
    total += std::exp(log_prod);
  }
  return total / static_cast<double>(n);
}

// Posterior mixture of expert predictions under outcome likelihoods: the
// prediction the classic probability-updating rule would make for experts
// reporting probabilities gamma.
inline double bayes_mixture(const std::vector<std::vector<double>>& gammas,
                            const std::vector<int>& omegas, size_t t) {
  const size_t n = gammas.front().size();
  std::vector<double> log_w(n, 0.0);
  for (size_t s = 0; s < t; ++s) {
    for (size_t i = 0; i < n; ++i) {
      const double p = omegas[s] == 1 ? gammas[s][i] : 1.0 - gammas[s][i];
      log_w[i] += p <= 0.0 ? -kInf : std::log(p);
    }
  }
  const double lse = log_sum_exp(log_w);
  double mix = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mix += std::exp(log_w[i] - lse) * gammas[t][i];
  }
  return mix;
}

}  // namespace dfcast::oracles

#endif  // DFCAST_TESTS_ORACLES_HPP_
