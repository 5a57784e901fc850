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

#ifndef DFCAST_PROTOCOLS_HPP_
#define DFCAST_PROTOCOLS_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dfcast/engine.hpp"
#include "dfcast/loss.hpp"
#include "dfcast/sim.hpp"

namespace dfcast::protocols {

struct Step {
  std::vector<ExpertAdvice> advice;
  double pi = 0.5;
  int omega = 0;
};

// Optional leading record of a serialized transcript.  Prior weights cannot
// be recovered from the step records, so specialist games carry them here;
// everything else is recomputable from the steps alone.
struct TranscriptMeta {
  std::string protocol;        // "", "standard", "evaluators", "constant",
                               // "multiobjective", "bipartite", "specialist"
  std::string loss_id;         // specialist: the single shared loss
  double eta = 0.0;            // specialist: the shared learning rate
  std::vector<double> priors;  // specialist: positive, summing to 1

  bool present() const { return !protocol.empty(); }
};

struct Transcript {
  TranscriptMeta meta;
  std::vector<Step> steps;

  int num_experts() const {
    return steps.empty() ? 0 : static_cast<int>(steps.front().advice.size());
  }
};

// One (virtual) expert's account after a game.  Cumulative losses may be
// +inf; the regret columns accumulate per-step differences under the
// extended-value convention and therefore stay meaningful even then.
struct LedgerRow {
  std::string expert;      // "e3" or "e1:square" for virtual experts
  std::string loss_id;     // evaluating loss (of the last awake step)
  bool constant_spec = true;  // (eta, loss) constant over the awake steps
  double eta = 0.0;
  double learner_loss = 0.0;   // learner's loss under this row's loss, awake steps
  double expert_loss = 0.0;
  double loss_regret = 0.0;    // sum_t loss_diff(learner, expert)
  double weighted_regret = 0.0;  // sum_t eta_t * loss_diff(learner, expert)
  std::int64_t awake_steps = 0;
  double weighted_bound = 0.0;   // ln N, or -ln p^n under specialist priors
};

struct RegretLedger {
  std::vector<LedgerRow> rows;
  // Learner's cumulative loss under the shared loss when every expert uses
  // one constant loss and never abstains; NaN otherwise.
  double standard_learner_loss = kNaN;
  std::vector<std::vector<bool>> awake_mask;  // [step][expert]
};

// Recompute the full ledger from a transcript (runners and the verifier share
// this path).
RegretLedger make_ledger(const Transcript& transcript);

struct ReportRow {
  std::string expert;
  std::string loss_id;
  std::int64_t awake_steps = 0;
  double learner_loss = 0.0;
  double expert_loss = 0.0;
  double weighted_regret = 0.0;
  double weighted_bound = 0.0;
  double slack = 0.0;  // bound - regret
  bool pass = true;
  // Loss-domain view, defined when the row's (eta, loss) is constant.
  double loss_regret = kNaN;
  double loss_bound = kNaN;
};

struct Report {
  std::vector<ReportRow> rows;
  bool all_pass = true;
};

// Per-expert rows with realized regret, theoretical bound, slack, pass/fail.
Report ledger_report(const RegretLedger& ledger, double tol = 1e-6);

void write_report_text(std::ostream& os, const Report& report);
void write_report_json(std::ostream& os, const Report& report);
Report read_report_json(std::istream& is);

// -----------------------------------------------------------------------------
// Game runners.

struct LearnerPolicy {
  enum class Kind { kDefensive, kFixed };
  Kind kind = Kind::kDefensive;
  double fixed = 0.5;

  static LearnerPolicy defensive() { return {}; }
  static LearnerPolicy fixed_prediction(double pi) {
    return {Kind::kFixed, pi};
  }
};

struct GameResult {
  Transcript transcript;
  RegretLedger ledger;
};

// The general game: each expert supplies prediction, learning rate and loss
// every step; the learner plays defensively (or a fixed baseline); reality
// sees the learner's prediction before moving.
GameResult run_evaluator_game(std::vector<sim::ExpertStrategy> experts,
                              sim::RealityStrategy reality,
                              std::int64_t horizon,
                              LearnerPolicy policy = LearnerPolicy::defensive());

// Same game with expert n pinned to losses[n] at its mixability constant.
GameResult run_constant_evaluator_game(
    std::vector<LossSpec> losses, std::vector<sim::ExpertStrategy> experts,
    sim::RealityStrategy reality, std::int64_t horizon,
    LearnerPolicy policy = LearnerPolicy::defensive());

// A virtual expert replays a base expert's predictions under its own loss.
struct VirtualExpert {
  int base_index = 0;
  LossSpec loss = LossSpec::log_loss();
  double eta = 1.0;
  std::string label;
};

// The product construction: one virtual expert per (base expert, loss) pair.
// Running the evaluator game over the M*N virtual experts bounds the regret
// against every base expert under every loss by ln(MN)/eta^m.
std::vector<VirtualExpert> multiobjective_wrap(int n_experts,
                                               std::span<const LossSpec> losses);

// Expert/loss pairs restricted to a relation; each expert needs at least one
// edge.  The bound becomes ln(K)/eta^m with K the number of edges.
struct BipartiteRelation {
  int num_experts = 0;
  std::vector<LossSpec> losses;
  std::vector<std::pair<int, int>> edges;  // (expert index, loss index)
};

std::vector<VirtualExpert> bipartite_wrap(const BipartiteRelation& relation);

GameResult run_virtual_game(std::vector<sim::ExpertStrategy> base_experts,
                            const std::vector<VirtualExpert>& experts,
                            sim::RealityStrategy reality, std::int64_t horizon,
                            LearnerPolicy policy = LearnerPolicy::defensive(),
                            std::string protocol_tag = "multiobjective");

// -----------------------------------------------------------------------------
// Serialization: one JSON record per line.  An optional first record carries
// the meta block; each step record holds (t, advice list, pi, omega) with
// advice entries (g | abstain, eta, loss id).  Doubles round-trip exactly.

void write_transcript(std::ostream& os, const Transcript& transcript);
Transcript read_transcript(std::istream& is);

// Per-step regret curves as a tab-separated table:
//   step  expert  weighted_regret  weighted_bound  loss_regret  loss_bound
void write_regret_curves(std::ostream& os, const Transcript& transcript);

// -----------------------------------------------------------------------------
// Independent verification: recomputes every loss, replays the mixture, and
// checks every applicable bound from the raw records alone.

struct VerifyIssue {
  std::int64_t step = 0;  // 0 = final/global check
  std::string what;
};

struct VerifyResult {
  bool ok = true;
  std::vector<VerifyIssue> issues;
};

VerifyResult verify_transcript(const Transcript& transcript,
                               double bound_tol = 1e-6,
                               double step_tol = 1e-9);

}  // namespace dfcast::protocols

#endif  // DFCAST_PROTOCOLS_HPP_
