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

#ifndef DFCAST_SPECIALIST_HPP_
#define DFCAST_SPECIALIST_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dfcast/loss.hpp"
#include "dfcast/protocols.hpp"
#include "dfcast/sim.hpp"

namespace dfcast::specialist {

// The game where experts may abstain ("sleep"): one shared proper eta-mixable
// loss, prior weights on the experts, and the guarantee that over the steps
// expert n is awake the learner's loss exceeds the expert's by at most
// (-ln prior_n)/eta.  With everyone always awake this is the classic
// weight-averaging aggregation scheme.
struct SpecialistConfig {
  LossSpec loss = LossSpec::log_loss();
  double eta = 1.0;
  std::vector<double> priors;

  // Validates: eta in (0, mixability constant], priors positive and summing
  // to 1 (within 1e-12), loss passes the properness certificate.
  static SpecialistConfig make(LossSpec loss, double eta,
                               std::vector<double> priors);
  static SpecialistConfig uniform(LossSpec loss, double eta, int num_experts);

  int num_experts() const { return static_cast<int>(priors.size()); }
};

// Per-expert log weights ln w^n; starts at ln prior_n.  Sleeping experts'
// weights never move; awake experts' weights scale by
// e^{eta (lambda(pi,omega) - lambda(gamma^n,omega))}, so the learner's own
// loss is the benchmark: beat it and your weight grows.
class SpecialistState {
 public:
  explicit SpecialistState(const SpecialistConfig& cfg);

  int num_experts() const { return static_cast<int>(log_w_.size()); }
  std::int64_t step() const { return step_; }
  double log_weight(int n) const { return log_w_[n]; }
  std::span<const double> log_weights() const { return log_w_; }

 private:
  friend SpecialistState specialist_update(const SpecialistState&,
                                           const SpecialistConfig&,
                                           std::span<const int>,
                                           std::span<const double>, double,
                                           int);
  std::vector<double> log_w_;
  std::int64_t step_ = 0;
};

// The prediction for this step: normalize the awake experts' weights (with a
// max shift, so underflow cannot zero them all out) and pass them through the
// loss's substitution function.  An empty awake set yields 0.5.  `awake`
// holds strictly increasing expert indices and `preds` the predictions of
// exactly those experts, else a ValidationError.
Prediction specialist_predict(const SpecialistState& state,
                              const SpecialistConfig& cfg,
                              std::span<const int> awake,
                              std::span<const double> preds);

// Fold the observed outcome into the weights of the awake experts only.
SpecialistState specialist_update(const SpecialistState& state,
                                  const SpecialistConfig& cfg,
                                  std::span<const int> awake,
                                  std::span<const double> preds, double pi,
                                  int omega);

// Play the whole game over materialized advice (one optional prediction per
// expert per step; empty = asleep) and outcomes.  Streams must have equal
// length.  The per-expert awake-step bounds are checked at the end and a
// violation raises InvariantViolation; the returned ledger carries the
// -ln(prior)/eta bounds.
protocols::GameResult run_specialist_game(
    const SpecialistConfig& cfg,
    const std::vector<std::vector<std::optional<double>>>& advice_stream,
    const std::vector<int>& outcomes);

// Strategy-driven variant (predictions and sleep from expert strategies, the
// outcome from a reality strategy that sees the learner's move first).  The
// strategies' own loss/eta fields are ignored; the config's loss governs.
protocols::GameResult run_specialist_game(const SpecialistConfig& cfg,
                                          std::vector<sim::ExpertStrategy> experts,
                                          sim::RealityStrategy reality,
                                          std::int64_t horizon);

}  // namespace dfcast::specialist

#endif  // DFCAST_SPECIALIST_HPP_
