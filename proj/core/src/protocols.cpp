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

#include "dfcast/protocols.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace dfcast::protocols {
namespace {

using nlohmann::json;

// Per-expert incremental account shared by the ledger, the curve writer and
// the verifier.
struct RowAccum {
  std::string loss_id;
  double eta = 0.0;
  bool constant_spec = true;
  bool any_awake = false;
  double learner_loss = 0.0;
  double expert_loss = 0.0;
  double loss_regret = 0.0;
  double weighted_regret = 0.0;
  std::int64_t awake_steps = 0;

  void add(const ExpertAdvice& a, double pi, int omega) {
    if (a.abstains()) return;
    const double ll = a.loss(pi, omega);
    const double el = a.loss(*a.prediction, omega);
    const double d = loss_diff(ll, el);
    learner_loss += ll;
    expert_loss += el;
    loss_regret += d;
    weighted_regret += a.eta * d;
    ++awake_steps;
    if (!any_awake) {
      any_awake = true;
      loss_id = a.loss.id();
      eta = a.eta;
    } else if (loss_id != a.loss.id() || eta != a.eta) {
      constant_spec = false;
    }
  }
};

double weighted_bound_for(const TranscriptMeta& meta, int expert, int n) {
  if (meta.protocol == "specialist" &&
      static_cast<int>(meta.priors.size()) == n) {
    return -std::log(meta.priors[expert]);
  }
  return std::log(static_cast<double>(n));
}

std::string default_label(int n) { return "e" + std::to_string(n); }

json encode_double(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

double decode_double(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return kNaN;
  }
  throw ValidationError("expected a number, got '" + j.dump() + "'");
}

std::string format_g(double x) {
  std::ostringstream os;
  os << std::setprecision(12) << x;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Ledger and report.

RegretLedger make_ledger(const Transcript& transcript) {
  RegretLedger ledger;
  const int n = transcript.num_experts();
  if (n == 0) return ledger;

  std::vector<RowAccum> accum(n);
  bool shared_loss = true;
  std::string shared_id;
  double shared_sum = 0.0;
  ledger.awake_mask.reserve(transcript.steps.size());
  for (const Step& step : transcript.steps) {
    if (static_cast<int>(step.advice.size()) != n) {
      throw ValidationError("transcript: advice length varies across steps");
    }
    std::vector<bool> mask(n);
    for (int i = 0; i < n; ++i) {
      const ExpertAdvice& a = step.advice[i];
      mask[i] = !a.abstains();
      if (a.abstains()) {
        shared_loss = false;
        continue;
      }
      if (shared_id.empty()) shared_id = a.loss.id();
      if (a.loss.id() != shared_id) shared_loss = false;
      accum[i].add(a, step.pi, step.omega);
    }
    if (shared_loss) shared_sum += step.advice.front().loss(step.pi, step.omega);
    ledger.awake_mask.push_back(std::move(mask));
  }

  ledger.rows.reserve(n);
  for (int i = 0; i < n; ++i) {
    const RowAccum& ac = accum[i];
    LedgerRow row;
    row.expert = default_label(i);
    row.loss_id = ac.loss_id;
    row.constant_spec = ac.constant_spec;
    row.eta = ac.eta;
    row.learner_loss = ac.learner_loss;
    row.expert_loss = ac.expert_loss;
    row.loss_regret = ac.loss_regret;
    row.weighted_regret = ac.weighted_regret;
    row.awake_steps = ac.awake_steps;
    row.weighted_bound = weighted_bound_for(transcript.meta, i, n);
    ledger.rows.push_back(std::move(row));
  }
  if (shared_loss && !shared_id.empty()) {
    ledger.standard_learner_loss = shared_sum;
  }
  return ledger;
}

Report ledger_report(const RegretLedger& ledger, double tol) {
  Report report;
  report.rows.reserve(ledger.rows.size());
  for (const LedgerRow& row : ledger.rows) {
    ReportRow out;
    out.expert = row.expert;
    out.loss_id = row.loss_id;
    out.awake_steps = row.awake_steps;
    out.learner_loss = row.learner_loss;
    out.expert_loss = row.expert_loss;
    out.weighted_regret = row.weighted_regret;
    out.weighted_bound = row.weighted_bound;
    out.slack = row.weighted_bound - row.weighted_regret;
    out.pass = row.weighted_regret <= row.weighted_bound + tol;
    if (row.constant_spec && row.awake_steps > 0) {
      out.loss_regret = row.loss_regret;
      out.loss_bound = row.weighted_bound / row.eta;
    }
    report.all_pass = report.all_pass && out.pass;
    report.rows.push_back(std::move(out));
  }
  return report;
}

void write_report_text(std::ostream& os, const Report& report) {
  os << std::left << std::setw(12) << "expert" << std::setw(16) << "loss"
     << std::setw(8) << "steps" << std::setw(14) << "learner"
     << std::setw(14) << "expert_loss" << std::setw(14) << "regret"
     << std::setw(12) << "bound" << std::setw(14) << "slack"
     << "status" << '\n';
  for (const ReportRow& row : report.rows) {
    std::ostringstream line;
    line << std::left << std::setw(12) << row.expert << std::setw(16)
         << row.loss_id << std::setw(8) << row.awake_steps;
    line << std::setprecision(6) << std::setw(14) << row.learner_loss
         << std::setw(14) << row.expert_loss << std::setw(14)
         << row.weighted_regret << std::setw(12) << row.weighted_bound
         << std::setw(14) << row.slack;
    line << (row.pass ? "pass" : "FAIL");
    os << line.str() << '\n';
  }
  os << (report.all_pass ? "all bounds hold" : "BOUND VIOLATION") << '\n';
}

void write_report_json(std::ostream& os, const Report& report) {
  json rows = json::array();
  for (const ReportRow& row : report.rows) {
    rows.push_back({{"expert", row.expert},
                    {"loss", row.loss_id},
                    {"awake_steps", row.awake_steps},
                    {"learner_loss", encode_double(row.learner_loss)},
                    {"expert_loss", encode_double(row.expert_loss)},
                    {"weighted_regret", encode_double(row.weighted_regret)},
                    {"weighted_bound", encode_double(row.weighted_bound)},
                    {"slack", encode_double(row.slack)},
                    {"pass", row.pass},
                    {"loss_regret", encode_double(row.loss_regret)},
                    {"loss_bound", encode_double(row.loss_bound)}});
  }
  os << json{{"rows", rows}, {"all_pass", report.all_pass}}.dump(2) << '\n';
}

Report read_report_json(std::istream& is) {
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("report parse error: ") + e.what());
  }
  Report report;
  try {
    report.all_pass = j.at("all_pass").get<bool>();
    for (const json& r : j.at("rows")) {
      ReportRow row;
      row.expert = r.at("expert").get<std::string>();
      row.loss_id = r.at("loss").get<std::string>();
      row.awake_steps = r.at("awake_steps").get<std::int64_t>();
      row.learner_loss = decode_double(r.at("learner_loss"));
      row.expert_loss = decode_double(r.at("expert_loss"));
      row.weighted_regret = decode_double(r.at("weighted_regret"));
      row.weighted_bound = decode_double(r.at("weighted_bound"));
      row.slack = decode_double(r.at("slack"));
      row.pass = r.at("pass").get<bool>();
      row.loss_regret = decode_double(r.at("loss_regret"));
      row.loss_bound = decode_double(r.at("loss_bound"));
      report.rows.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("report parse error: ") + e.what());
  }
  return report;
}

// ---------------------------------------------------------------------------
// Runners.

namespace {

GameResult run_game_loop(std::vector<sim::ExpertStrategy>& experts,
                         sim::RealityStrategy& reality, std::int64_t horizon,
                         LearnerPolicy policy, TranscriptMeta meta) {
  if (experts.empty()) throw ValidationError("game needs at least one expert");
  if (horizon < 0) throw ValidationError("horizon must be nonnegative");
  const int n = static_cast<int>(experts.size());
  EvaluatorState state(n);
  Transcript transcript;
  transcript.meta = std::move(meta);
  transcript.steps.reserve(static_cast<size_t>(horizon));
  for (std::int64_t t = 1; t <= horizon; ++t) {
    Step step;
    step.advice.reserve(n);
    for (int i = 0; i < n; ++i) {
      ExpertAdvice advice;
      try {
        advice = experts[i].next_advice(t);
        validate_advice(advice);
      } catch (const ValidationError& e) {
        throw ValidationError("expert " + std::to_string(i) + " at step " +
                              std::to_string(t) + ": " + e.what());
      }
      step.advice.push_back(std::move(advice));
    }
    step.pi = policy.kind == LearnerPolicy::Kind::kDefensive
                  ? choose_prediction(state, step.advice).prediction
                  : policy.fixed;
    step.omega = reality.next_outcome(t, step.pi);
    if (!is_valid_outcome(step.omega)) {
      throw ValidationError("reality emitted an invalid outcome at step " +
                            std::to_string(t));
    }
    state = update_state(state, step.advice, step.pi, step.omega);
    transcript.steps.push_back(std::move(step));
  }
  GameResult result;
  result.ledger = make_ledger(transcript);
  result.transcript = std::move(transcript);
  return result;
}

}  // namespace

GameResult run_evaluator_game(std::vector<sim::ExpertStrategy> experts,
                              sim::RealityStrategy reality,
                              std::int64_t horizon, LearnerPolicy policy) {
  TranscriptMeta meta;
  meta.protocol = "evaluators";
  return run_game_loop(experts, reality, horizon, policy, std::move(meta));
}

GameResult run_constant_evaluator_game(std::vector<LossSpec> losses,
                                       std::vector<sim::ExpertStrategy> experts,
                                       sim::RealityStrategy reality,
                                       std::int64_t horizon,
                                       LearnerPolicy policy) {
  if (losses.size() != experts.size()) {
    throw ValidationError("constant game: one loss per expert required");
  }
  for (size_t i = 0; i < experts.size(); ++i) {
    experts[i].with_loss(losses[i]);
  }
  TranscriptMeta meta;
  meta.protocol = "constant";
  return run_game_loop(experts, reality, horizon, policy, std::move(meta));
}

std::vector<VirtualExpert> multiobjective_wrap(int n_experts,
                                               std::span<const LossSpec> losses) {
  if (n_experts < 1) throw ValidationError("multiobjective: need >= 1 expert");
  if (losses.empty()) throw ValidationError("multiobjective: need >= 1 loss");
  std::vector<VirtualExpert> out;
  out.reserve(static_cast<size_t>(n_experts) * losses.size());
  for (int b = 0; b < n_experts; ++b) {
    for (const LossSpec& loss : losses) {
      out.push_back({b, loss, mixability_constant(loss),
                     default_label(b) + ":" + loss.id()});
    }
  }
  return out;
}

std::vector<VirtualExpert> bipartite_wrap(const BipartiteRelation& relation) {
  if (relation.num_experts < 1) {
    throw ValidationError("bipartite: need >= 1 expert");
  }
  if (relation.losses.empty()) throw ValidationError("bipartite: need >= 1 loss");
  std::vector<bool> linked(relation.num_experts, false);
  std::vector<VirtualExpert> out;
  out.reserve(relation.edges.size());
  for (const auto& [e, l] : relation.edges) {
    if (e < 0 || e >= relation.num_experts || l < 0 ||
        l >= static_cast<int>(relation.losses.size())) {
      throw ValidationError("bipartite: edge (" + std::to_string(e) + "," +
                            std::to_string(l) + ") out of range");
    }
    linked[e] = true;
    const LossSpec& loss = relation.losses[l];
    out.push_back({e, loss, mixability_constant(loss),
                   default_label(e) + ":" + loss.id()});
  }
  for (int e = 0; e < relation.num_experts; ++e) {
    if (!linked[e]) {
      throw ValidationError("bipartite: expert " + std::to_string(e) +
                            " has no loss linked");
    }
  }
  return out;
}

GameResult run_virtual_game(std::vector<sim::ExpertStrategy> base_experts,
                            const std::vector<VirtualExpert>& experts,
                            sim::RealityStrategy reality, std::int64_t horizon,
                            LearnerPolicy policy, std::string protocol_tag) {
  if (base_experts.empty() || experts.empty()) {
    throw ValidationError("virtual game needs base and virtual experts");
  }
  for (const VirtualExpert& v : experts) {
    if (v.base_index < 0 ||
        v.base_index >= static_cast<int>(base_experts.size())) {
      throw ValidationError("virtual expert refers to unknown base expert " +
                            std::to_string(v.base_index));
    }
  }
  const int nb = static_cast<int>(base_experts.size());
  const int nv = static_cast<int>(experts.size());
  EvaluatorState state(nv);
  Transcript transcript;
  transcript.meta.protocol = std::move(protocol_tag);
  transcript.steps.reserve(static_cast<size_t>(horizon));
  for (std::int64_t t = 1; t <= horizon; ++t) {
    std::vector<std::optional<double>> base_gamma(nb);
    for (int b = 0; b < nb; ++b) {
      base_gamma[b] = base_experts[b].next_advice(t).prediction;
    }
    Step step;
    step.advice.reserve(nv);
    for (const VirtualExpert& v : experts) {
      ExpertAdvice advice{base_gamma[v.base_index], v.eta, v.loss};
      try {
        validate_advice(advice);
      } catch (const ValidationError& e) {
        throw ValidationError("virtual expert " + v.label + " at step " +
                              std::to_string(t) + ": " + e.what());
      }
      step.advice.push_back(std::move(advice));
    }
    step.pi = policy.kind == LearnerPolicy::Kind::kDefensive
                  ? choose_prediction(state, step.advice).prediction
                  : policy.fixed;
    step.omega = reality.next_outcome(t, step.pi);
    state = update_state(state, step.advice, step.pi, step.omega);
    transcript.steps.push_back(std::move(step));
  }
  GameResult result;
  result.ledger = make_ledger(transcript);
  for (int i = 0; i < nv; ++i) result.ledger.rows[i].expert = experts[i].label;
  result.transcript = std::move(transcript);
  return result;
}

// ---------------------------------------------------------------------------
// Serialization.

void write_transcript(std::ostream& os, const Transcript& transcript) {
  if (transcript.meta.present()) {
    json meta{{"protocol", transcript.meta.protocol}};
    if (!transcript.meta.loss_id.empty()) meta["loss"] = transcript.meta.loss_id;
    if (transcript.meta.eta > 0.0) meta["eta"] = transcript.meta.eta;
    if (!transcript.meta.priors.empty()) meta["priors"] = transcript.meta.priors;
    os << json{{"meta", meta}}.dump() << '\n';
  }
  std::int64_t t = 0;
  for (const Step& step : transcript.steps) {
    json advice = json::array();
    for (const ExpertAdvice& a : step.advice) {
      json entry{{"eta", a.eta}, {"loss", a.loss.id()}};
      if (a.abstains()) {
        entry["abstain"] = true;
      } else {
        entry["g"] = *a.prediction;
      }
      advice.push_back(std::move(entry));
    }
    os << json{{"t", ++t},
               {"advice", advice},
               {"pi", step.pi},
               {"omega", step.omega}}
              .dump()
       << '\n';
  }
}

Transcript read_transcript(std::istream& is) {
  Transcript transcript;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError("transcript line " + std::to_string(line_no) +
                            ": " + e.what());
    }
    try {
      if (j.contains("meta")) {
        if (!transcript.steps.empty() || transcript.meta.present()) {
          throw ValidationError("meta record must come first and be unique");
        }
        const json& m = j["meta"];
        transcript.meta.protocol = m.at("protocol").get<std::string>();
        if (m.contains("loss")) {
          transcript.meta.loss_id = m["loss"].get<std::string>();
        }
        if (m.contains("eta")) transcript.meta.eta = m["eta"].get<double>();
        if (m.contains("priors")) {
          transcript.meta.priors = m["priors"].get<std::vector<double>>();
        }
        continue;
      }
      Step step;
      step.pi = j.at("pi").get<double>();
      step.omega = j.at("omega").get<int>();
      for (const json& e : j.at("advice")) {
        ExpertAdvice advice;
        advice.eta = e.at("eta").get<double>();
        advice.loss = LossSpec::parse(e.at("loss").get<std::string>());
        if (e.contains("g")) {
          advice.prediction = e["g"].get<double>();
        } else if (!e.value("abstain", false)) {
          throw ValidationError("advice entry needs 'g' or 'abstain'");
        }
        step.advice.push_back(std::move(advice));
      }
      if (!transcript.steps.empty() &&
          step.advice.size() != transcript.steps.front().advice.size()) {
        throw ValidationError("advice length varies across steps");
      }
      transcript.steps.push_back(std::move(step));
    } catch (const json::exception& e) {
      throw ValidationError("transcript line " + std::to_string(line_no) +
                            ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("transcript line " + std::to_string(line_no) +
                            ": " + e.what());
    }
  }
  return transcript;
}

void write_regret_curves(std::ostream& os, const Transcript& transcript) {
  os << "step\texpert\tweighted_regret\tweighted_bound\tloss_regret\tloss_bound\n";
  const int n = transcript.num_experts();
  if (n == 0) return;
  const RegretLedger final_ledger = make_ledger(transcript);
  std::vector<RowAccum> accum(n);
  std::int64_t t = 0;
  for (const Step& step : transcript.steps) {
    ++t;
    for (int i = 0; i < n; ++i) {
      accum[i].add(step.advice[i], step.pi, step.omega);
      const LedgerRow& row = final_ledger.rows[i];
      const double wb = row.weighted_bound;
      const bool has_loss_view = row.constant_spec && accum[i].any_awake;
      os << t << '\t' << row.expert << '\t' << format_g(accum[i].weighted_regret)
         << '\t' << format_g(wb) << '\t'
         << (has_loss_view ? format_g(accum[i].loss_regret) : "nan") << '\t'
         << (has_loss_view ? format_g(wb / accum[i].eta) : "nan") << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Verification.

VerifyResult verify_transcript(const Transcript& transcript, double bound_tol,
                               double step_tol) {
  VerifyResult result;
  constexpr size_t kMaxIssues = 32;
  const auto fail = [&](std::int64_t step, std::string what) {
    result.ok = false;
    if (result.issues.size() < kMaxIssues) {
      result.issues.push_back({step, std::move(what)});
    }
  };

  if (transcript.steps.empty()) return result;  // vacuously fine
  const int n = transcript.num_experts();

  if (transcript.meta.protocol == "specialist") {
    const auto& priors = transcript.meta.priors;
    if (static_cast<int>(priors.size()) == n) {
      double sum = 0.0;
      for (double p : priors) {
        if (!(p > 0.0)) fail(0, "specialist priors must be positive");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12) fail(0, "specialist priors must sum to 1");
    } else if (!priors.empty()) {
      fail(0, "specialist priors length does not match expert count");
    }
  }

  std::int64_t t = 0;
  for (const Step& step : transcript.steps) {
    ++t;
    if (static_cast<int>(step.advice.size()) != n) {
      fail(t, "advice length varies across steps");
      return result;
    }
    if (!is_valid_prediction(step.pi)) fail(t, "prediction out of range");
    if (!is_valid_outcome(step.omega)) fail(t, "outcome not binary");
    for (int i = 0; i < n; ++i) {
      try {
        validate_advice(step.advice[i]);
      } catch (const ValidationError& e) {
        fail(t, "expert " + std::to_string(i) + ": " + e.what());
      }
    }
  }
  if (!result.ok) return result;

  std::vector<double> bounds(n);
  for (int i = 0; i < n; ++i) bounds[i] = weighted_bound_for(transcript.meta, i, n);

  // The replayed supermartingale weights experts by their priors (uniform
  // unless the meta block carries specialist priors).
  std::vector<double> log_prior(n, -std::log(static_cast<double>(n)));
  if (transcript.meta.protocol == "specialist" &&
      static_cast<int>(transcript.meta.priors.size()) == n) {
    for (int i = 0; i < n; ++i) log_prior[i] = std::log(transcript.meta.priors[i]);
  }
  const auto weighted_mixture = [&](const EvaluatorState& s) {
    std::vector<double> terms(n);
    for (int i = 0; i < n; ++i) terms[i] = log_prior[i] + s.log_weight(i);
    return std::exp(log_sum_exp(terms));
  };

  EvaluatorState state(n);
  double prev_q = weighted_mixture(state);
  std::vector<bool> bound_reported(n, false);
  t = 0;
  for (const Step& step : transcript.steps) {
    ++t;
    try {
      state = update_state(state, step.advice, step.pi, step.omega);
    } catch (const InvariantViolation& e) {
      fail(t, e.what());
      return result;
    }
    const double q = weighted_mixture(state);
    if (!(q <= prev_q + step_tol)) {
      fail(t, "mixture value increased from " + format_g(prev_q) + " to " +
                  format_g(q));
      if (result.issues.size() >= kMaxIssues) return result;
    }
    prev_q = q;
    for (int i = 0; i < n; ++i) {
      if (!bound_reported[i] && state.log_weight(i) > bounds[i] + bound_tol) {
        bound_reported[i] = true;
        fail(t, "weighted regret bound exceeded for expert " +
                    std::to_string(i) + ": " + format_g(state.log_weight(i)) +
                    " > " + format_g(bounds[i]));
      }
    }
  }

  const RegretLedger ledger = make_ledger(transcript);
  for (int i = 0; i < n; ++i) {
    const LedgerRow& row = ledger.rows[i];
    if (row.constant_spec && row.awake_steps > 0) {
      const double loss_bound = row.weighted_bound / row.eta;
      if (!(row.loss_regret <= loss_bound + bound_tol)) {
        fail(0, "cumulative loss bound exceeded for expert " +
                    std::to_string(i) + ": " + format_g(row.loss_regret) +
                    " > " + format_g(loss_bound));
      }
    }
  }
  return result;
}

}  // namespace dfcast::protocols
