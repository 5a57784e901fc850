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

#include "dfcast/specialist.hpp"

#include <cmath>
#include <string>

namespace dfcast::specialist {
namespace {

void validate_awake(std::span<const int> awake, std::span<const double> preds,
                    int num_experts) {
  if (awake.size() != preds.size()) {
    throw ValidationError(
        "specialist: predictions must be given exactly for the awake experts");
  }
  int prev = -1;
  for (int idx : awake) {
    if (idx <= prev || idx >= num_experts) {
      throw ValidationError(
          "specialist: awake indices must be strictly increasing and in range");
    }
    prev = idx;
  }
  for (double g : preds) {
    if (!is_valid_prediction(g)) {
      throw ValidationError("specialist: predictions must lie in [0,1]");
    }
  }
}

}  // namespace

SpecialistConfig SpecialistConfig::make(LossSpec loss, double eta,
                                        std::vector<double> priors) {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw ValidationError("specialist config: eta must be positive");
  }
  if (!loss.mixable_at_any_eta() && eta > loss.eta_max() * (1.0 + 1e-12)) {
    throw MixabilityError("specialist config: eta " + std::to_string(eta) +
                          " exceeds mixability constant of " + loss.id());
  }
  if (priors.empty()) {
    throw ValidationError("specialist config: need at least one expert");
  }
  double sum = 0.0;
  for (double p : priors) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw ValidationError("specialist config: priors must be positive");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw ValidationError("specialist config: priors must sum to 1");
  }
  if (!check_proper(loss, 401)) {
    throw ValidationError("specialist config: loss " + loss.id() +
                          " failed the properness certificate");
  }
  SpecialistConfig cfg;
  cfg.loss = std::move(loss);
  cfg.eta = eta;
  cfg.priors = std::move(priors);
  return cfg;
}

SpecialistConfig SpecialistConfig::uniform(LossSpec loss, double eta,
                                           int num_experts) {
  if (num_experts < 1) {
    throw ValidationError("specialist config: need at least one expert");
  }
  return make(std::move(loss), eta,
              std::vector<double>(num_experts, 1.0 / num_experts));
}

SpecialistState::SpecialistState(const SpecialistConfig& cfg) {
  log_w_.reserve(cfg.priors.size());
  for (double p : cfg.priors) log_w_.push_back(std::log(p));
}

Prediction specialist_predict(const SpecialistState& state,
                              const SpecialistConfig& cfg,
                              std::span<const int> awake,
                              std::span<const double> preds) {
  if (state.num_experts() != cfg.num_experts()) {
    throw ValidationError("specialist: state does not match config");
  }
  validate_awake(awake, preds, cfg.num_experts());
  if (awake.empty()) {
    return substitution(cfg.loss, cfg.eta, {}, {});
  }
  // Normalized weights of the awake experts, exponentiated after a max shift.
  double shift = -kInf;
  for (int idx : awake) shift = std::max(shift, state.log_weight(idx));
  std::vector<double> weights(awake.size());
  double total = 0.0;
  if (std::isinf(shift)) {
    // Every awake weight collapsed (or blew up); fall back to equal shares.
    for (double& w : weights) w = 1.0;
    total = static_cast<double>(weights.size());
  } else {
    for (size_t i = 0; i < awake.size(); ++i) {
      weights[i] = std::exp(state.log_weight(awake[i]) - shift);
      total += weights[i];
    }
  }
  for (double& w : weights) w /= total;
  return substitution(cfg.loss, cfg.eta, weights, preds);
}

SpecialistState specialist_update(const SpecialistState& state,
                                  const SpecialistConfig& cfg,
                                  std::span<const int> awake,
                                  std::span<const double> preds, double pi,
                                  int omega) {
  if (state.num_experts() != cfg.num_experts()) {
    throw ValidationError("specialist: state does not match config");
  }
  validate_awake(awake, preds, cfg.num_experts());
  if (!is_valid_prediction(pi) || !is_valid_outcome(omega)) {
    throw ValidationError("specialist: invalid prediction or outcome");
  }
  SpecialistState next = state;
  const double lp = cfg.loss(pi, omega);
  for (size_t i = 0; i < awake.size(); ++i) {
    next.log_w_[awake[i]] +=
        cfg.eta * loss_diff(lp, cfg.loss(preds[i], omega));
  }
  next.step_ = state.step_ + 1;
  return next;
}

namespace {

protocols::GameResult finish_game(const SpecialistConfig& cfg,
                                  protocols::Transcript transcript) {
  protocols::GameResult result;
  result.ledger = protocols::make_ledger(transcript);
  result.transcript = std::move(transcript);
  // The algorithm's own guarantee, checked on every run it produces.
  for (int n = 0; n < cfg.num_experts(); ++n) {
    const protocols::LedgerRow& row = result.ledger.rows[n];
    const double bound = -std::log(cfg.priors[n]) / cfg.eta;
    if (!(row.loss_regret <= bound + 1e-6)) {
      throw InvariantViolation(
          "specialist game: awake-step regret bound violated for expert " +
          std::to_string(n));
    }
  }
  return result;
}

}  // namespace

protocols::GameResult run_specialist_game(
    const SpecialistConfig& cfg,
    const std::vector<std::vector<std::optional<double>>>& advice_stream,
    const std::vector<int>& outcomes) {
  if (advice_stream.size() != outcomes.size()) {
    throw ValidationError(
        "specialist game: advice and outcome streams differ in length");
  }
  const int n = cfg.num_experts();
  SpecialistState state(cfg);
  protocols::Transcript transcript;
  transcript.meta.protocol = "specialist";
  transcript.meta.loss_id = cfg.loss.id();
  transcript.meta.eta = cfg.eta;
  transcript.meta.priors = cfg.priors;
  transcript.steps.reserve(advice_stream.size());

  std::vector<int> awake;
  std::vector<double> preds;
  for (size_t t = 0; t < advice_stream.size(); ++t) {
    const auto& moves = advice_stream[t];
    if (static_cast<int>(moves.size()) != n) {
      throw ValidationError("specialist game: advice entry at step " +
                            std::to_string(t + 1) + " has wrong length");
    }
    awake.clear();
    preds.clear();
    for (int i = 0; i < n; ++i) {
      if (moves[i].has_value()) {
        awake.push_back(i);
        preds.push_back(*moves[i]);
      }
    }
    const double pi = specialist_predict(state, cfg, awake, preds);
    const int omega = outcomes[t];
    if (!is_valid_outcome(omega)) {
      throw ValidationError("specialist game: invalid outcome at step " +
                            std::to_string(t + 1));
    }
    state = specialist_update(state, cfg, awake, preds, pi, omega);

    protocols::Step step;
    step.advice.reserve(n);
    for (int i = 0; i < n; ++i) {
      step.advice.push_back(ExpertAdvice{moves[i], cfg.eta, cfg.loss});
    }
    step.pi = pi;
    step.omega = omega;
    transcript.steps.push_back(std::move(step));
  }
  return finish_game(cfg, std::move(transcript));
}

protocols::GameResult run_specialist_game(const SpecialistConfig& cfg,
                                          std::vector<sim::ExpertStrategy> experts,
                                          sim::RealityStrategy reality,
                                          std::int64_t horizon) {
  if (static_cast<int>(experts.size()) != cfg.num_experts()) {
    throw ValidationError("specialist game: one strategy per prior required");
  }
  if (horizon < 0) throw ValidationError("specialist game: bad horizon");
  const int n = cfg.num_experts();
  SpecialistState state(cfg);
  protocols::Transcript transcript;
  transcript.meta.protocol = "specialist";
  transcript.meta.loss_id = cfg.loss.id();
  transcript.meta.eta = cfg.eta;
  transcript.meta.priors = cfg.priors;
  transcript.steps.reserve(static_cast<size_t>(horizon));

  std::vector<int> awake;
  std::vector<double> preds;
  for (std::int64_t t = 1; t <= horizon; ++t) {
    std::vector<std::optional<double>> moves(n);
    for (int i = 0; i < n; ++i) {
      moves[i] = experts[i].next_advice(t).prediction;
    }
    awake.clear();
    preds.clear();
    for (int i = 0; i < n; ++i) {
      if (moves[i].has_value()) {
        awake.push_back(i);
        preds.push_back(*moves[i]);
      }
    }
    const double pi = specialist_predict(state, cfg, awake, preds);
    const int omega = reality.next_outcome(t, pi);
    state = specialist_update(state, cfg, awake, preds, pi, omega);

    protocols::Step step;
    step.advice.reserve(n);
    for (int i = 0; i < n; ++i) {
      step.advice.push_back(ExpertAdvice{moves[i], cfg.eta, cfg.loss});
    }
    step.pi = pi;
    step.omega = omega;
    transcript.steps.push_back(std::move(step));
  }
  return finish_game(cfg, std::move(transcript));
}

}  // namespace dfcast::specialist
