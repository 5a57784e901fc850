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

#ifndef DFCAST_ENGINE_HPP_
#define DFCAST_ENGINE_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dfcast/common.hpp"
#include "dfcast/loss.hpp"

namespace dfcast {

// One expert's move for a step: a prediction together with the learning rate
// and loss function by which both the expert and the learner are to be judged
// this step.  An absent prediction means the expert abstains; abstention is
// handled by substituting the zero loss, which leaves every tally unchanged.
struct ExpertAdvice {
  std::optional<double> prediction;
  double eta = 1.0;
  LossSpec loss = LossSpec::log_loss();

  bool abstains() const { return !prediction.has_value(); }
  // The advice with abstention resolved to the zero loss.
  ExpertAdvice resolved() const;
};

// Cheap structural checks (prediction range, eta vs mixability constant).
// Properness of catalogue losses is certified once per loss id and cached.
void validate_advice(const ExpertAdvice& advice);

// Per-expert log-domain account of the running product
//   Q^n_t = prod_s e^{eta^n_s (lambda^n_s(pi_s, omega_s) - lambda^n_s(gamma^n_s, omega_s))},
// i.e. log_weight(n) is expert n's cumulative weighted regret.  The empty
// product is 1, so states start at zero.  Under defensive play every entry
// stays at or below ln N.
class EvaluatorState {
 public:
  explicit EvaluatorState(int num_experts);

  int num_experts() const { return static_cast<int>(log_q_.size()); }
  std::int64_t step() const { return step_; }
  double log_weight(int n) const { return log_q_[n]; }
  std::span<const double> log_weights() const { return log_q_; }

  // (1/N) sum_n e^{log_q[n]}, the mixture the algorithm keeps from growing.
  double mixture_value() const;

 private:
  friend EvaluatorState update_state(const EvaluatorState&,
                                     std::span<const ExpertAdvice>, double, int);
  std::vector<double> log_q_;
  std::int64_t step_ = 0;
};

// e^{eta (lambda(pi,omega) - lambda(gamma,omega))} under the extended-value
// conventions (inf - inf = 0, so the factor is 1 when both sides blow up).
// The advice must not abstain; resolve abstention first.
double step_factor(const ExpertAdvice& advice, double pi, int omega);

// Increment the mixture would take at (pi, omega):
//   (1/N) sum_n e^{log_q[n]} (step_factor_n(pi, omega) - 1).
// Algebraically identical to the difference of full-history mixture products;
// computed from the log-domain state in O(N).
double step_increment(const EvaluatorState& state,
                      std::span<const ExpertAdvice> advice, double pi,
                      int omega);

enum class StepBranch { kEndpointZero, kEndpointOne, kRoot };

struct StepDecision {
  double prediction = 0.5;
  StepBranch branch = StepBranch::kRoot;
  // Endpoint branches record the accepting increment value; the root branch
  // records the residual of the balanced increments at the returned point.
  double root_residual = 0.0;
};

// The defensive choice of prediction: the point at which the mixture cannot
// grow whatever the outcome.  Endpoints are tried first with a strict <= 0
// test on exactly-computed increments; otherwise the difference
// step_increment(pi,1) - step_increment(pi,0) changes sign across [0,1] and
// is bisected to |interval| <= 1e-12, returning the midpoint.  A missing sign
// change is reported as an InvariantViolation, never silently patched.
StepDecision choose_prediction(const EvaluatorState& state,
                               std::span<const ExpertAdvice> advice);

// Fold one observed step into the account: log_q[n] += eta_n * loss diff.
// A +inf increment on a live expert (learner suffered infinite loss where the
// expert did not) is an InvariantViolation; an already-eliminated expert
// (log weight -inf) stays eliminated.
EvaluatorState update_state(const EvaluatorState& state,
                            std::span<const ExpertAdvice> advice, double pi,
                            int omega);

// Test oracle for the one-step mean inequality behind the whole construction:
//   pi e^{eta (lambda(pi,1)-lambda(gamma,1))}
//   + (1-pi) e^{eta (lambda(pi,0)-lambda(gamma,0))} <= 1 + 1e-12,
// which holds whenever the loss is proper and eta-mixable.
bool verify_step_supermartingale(const ExpertAdvice& advice, double pi);

}  // namespace dfcast

#endif  // DFCAST_ENGINE_HPP_
