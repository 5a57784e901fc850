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

#include "dfcast/engine.hpp"

#include <cmath>
#include <mutex>
#include <string>
#include <unordered_map>

namespace dfcast {
namespace {

bool is_certified_proper(const LossSpec& loss) {
  static std::mutex mu;
  static std::unordered_map<std::string, bool> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(loss.id());
  if (it != cache.end()) return it->second;
  const bool ok = check_proper(loss, 401);
  cache.emplace(loss.id(), ok);
  return ok;
}

}  // namespace

ExpertAdvice ExpertAdvice::resolved() const {
  if (!abstains()) return *this;
  return ExpertAdvice{0.5, eta, LossSpec::zero()};
}

void validate_advice(const ExpertAdvice& advice) {
  if (!(advice.eta > 0.0) || !std::isfinite(advice.eta)) {
    throw ValidationError("advice: eta must be positive and finite");
  }
  if (advice.abstains()) return;
  if (!is_valid_prediction(*advice.prediction)) {
    throw ValidationError("advice: prediction must lie in [0,1]");
  }
  if (!advice.loss.mixable_at_any_eta() &&
      advice.eta > advice.loss.eta_max() * (1.0 + 1e-12)) {
    throw ValidationError("advice: eta " + std::to_string(advice.eta) +
                          " exceeds mixability constant of " + advice.loss.id());
  }
  if (!is_certified_proper(advice.loss)) {
    throw ValidationError("advice: loss " + advice.loss.id() +
                          " failed the properness certificate");
  }
}

EvaluatorState::EvaluatorState(int num_experts) {
  if (num_experts < 1) throw ValidationError("state needs at least one expert");
  log_q_.assign(num_experts, 0.0);
}

double EvaluatorState::mixture_value() const {
  return std::exp(log_sum_exp(log_q_) - std::log(num_experts()));
}

double step_factor(const ExpertAdvice& advice, double pi, int omega) {
  if (advice.abstains()) {
    throw ValidationError("step_factor: abstaining advice must be resolved first");
  }
  const double lp = advice.loss(pi, omega);
  const double lg = advice.loss(*advice.prediction, omega);
  return std::exp(advice.eta * loss_diff(lp, lg));
}

double step_increment(const EvaluatorState& state,
                      std::span<const ExpertAdvice> advice, double pi,
                      int omega) {
  const int n = state.num_experts();
  if (static_cast<int>(advice.size()) != n) {
    throw ValidationError("step_increment: advice length does not match state");
  }
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double lw = state.log_weight(i);
    if (std::isinf(lw) && lw < 0) continue;  // eliminated expert, zero weight
    const ExpertAdvice a = advice[i].resolved();
    const double log_factor =
        a.eta * loss_diff(a.loss(pi, omega), a.loss(*a.prediction, omega));
    // e^{lw} (e^{log_factor} - 1), formed as a difference of exponentials so
    // a deeply negative lw underflows to a zero term instead of 0 * inf.
    if (std::isinf(log_factor) && log_factor > 0) {
      sum = kInf;  // a live expert's weight would blow up at this point
      continue;
    }
    sum += std::exp(lw + log_factor) - std::exp(lw);
  }
  return sum / n;
}

StepDecision choose_prediction(const EvaluatorState& state,
                               std::span<const ExpertAdvice> advice) {
  for (const ExpertAdvice& a : advice) validate_advice(a);
  std::vector<ExpertAdvice> resolved;
  resolved.reserve(advice.size());
  for (const ExpertAdvice& a : advice) resolved.push_back(a.resolved());

  const auto f = [&](double pi, int omega) {
    return step_increment(state, resolved, pi, omega);
  };

  const double f01 = f(0.0, 1);
  if (f01 <= 0.0) return {0.0, StepBranch::kEndpointZero, f01};
  const double f10 = f(1.0, 0);
  if (f10 <= 0.0) return {1.0, StepBranch::kEndpointOne, f10};

  // Both endpoint increments are positive, so the increment difference
  // g(pi) = f(pi,1) - f(pi,0) is positive at 0 and negative at 1.
  const auto g = [&](double pi) { return f(pi, 1) - f(pi, 0); };
  const double g_lo = g(0.0);
  const double g_hi = g(1.0);
  if (std::isnan(g_lo) || std::isnan(g_hi) || !(g_lo > 0.0) || !(g_hi < 0.0)) {
    throw InvariantViolation(
        "choose_prediction: increment difference has no sign change");
  }
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if (std::isnan(gm)) {
      throw InvariantViolation("choose_prediction: increment difference is NaN");
    }
    if (gm == 0.0) {
      lo = hi = mid;
      break;
    }
    (gm > 0.0 ? lo : hi) = mid;
  }
  const double pi = 0.5 * (lo + hi);
  return {pi, StepBranch::kRoot, g(pi)};
}

EvaluatorState update_state(const EvaluatorState& state,
                            std::span<const ExpertAdvice> advice, double pi,
                            int omega) {
  const int n = state.num_experts();
  if (static_cast<int>(advice.size()) != n) {
    throw ValidationError("update_state: advice length does not match state");
  }
  if (!is_valid_prediction(pi) || !is_valid_outcome(omega)) {
    throw ValidationError("update_state: invalid prediction or outcome");
  }
  EvaluatorState next = state;
  for (int i = 0; i < n; ++i) {
    const ExpertAdvice a = advice[i].resolved();
    const double incr =
        a.eta * loss_diff(a.loss(pi, omega), a.loss(*a.prediction, omega));
    double& lw = next.log_q_[i];
    if (std::isinf(lw) && lw < 0) continue;  // eliminated stays eliminated
    if (std::isinf(incr) && incr > 0) {
      throw InvariantViolation(
          "update_state: learner suffered infinite loss where expert " +
          std::to_string(i) + " did not (step " +
          std::to_string(state.step() + 1) + ")");
    }
    lw += incr;
  }
  next.step_ = state.step_ + 1;
  return next;
}

bool verify_step_supermartingale(const ExpertAdvice& advice, double pi) {
  const ExpertAdvice a = advice.resolved();
  const double gamma = *a.prediction;
  const double f1 =
      std::exp(a.eta * loss_diff(a.loss(pi, 1), a.loss(gamma, 1)));
  const double f0 =
      std::exp(a.eta * loss_diff(a.loss(pi, 0), a.loss(gamma, 0)));
  const double mean = prod_zero_inf(pi, f1) + prod_zero_inf(1.0 - pi, f0);
  return mean <= 1.0 + 1e-12;
}

}  // namespace dfcast
