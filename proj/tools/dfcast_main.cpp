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
// Command-line front end: run games from a JSON config, verify recorded
// transcripts independently, certify loss functions, and re-render ledger
// reports.  Exit codes: 0 = pass, 1 = a bound or certificate check failed,
// 2 = usage/config/parse error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dfcast/loss.hpp"
#include "dfcast/protocols.hpp"
#include "dfcast/sim.hpp"
#include "dfcast/specialist.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace dfcast;

constexpr int kExitPass = 0;
constexpr int kExitViolation = 1;
constexpr int kExitUsage = 2;

double env_tolerance(const char* name, double fallback) {
  const char* raw = std::getenv(name);
  if (raw == nullptr) return fallback;
  try {
    return std::stod(raw);
  } catch (...) {
    std::cerr << "warning: ignoring unparsable " << name << "='" << raw << "'\n";
    return fallback;
  }
}

struct RunConfig {
  std::string protocol = "evaluators";
  std::vector<std::string> expert_specs;
  std::string reality_spec;
  std::int64_t horizon = 0;
  std::vector<std::uint64_t> seeds;  // empty = one run with declared seeds
  std::optional<std::string> loss_id;             // standard / specialist
  std::optional<double> eta;                      // standard / specialist
  std::vector<std::string> loss_ids;              // constant / multiobjective / bipartite
  std::vector<std::pair<int, int>> relation;      // bipartite
  std::vector<double> priors;                     // specialist
  protocols::LearnerPolicy learner;
  fs::path out_dir = ".";
  std::string prefix = "run";
};

RunConfig parse_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config parse error: ") + e.what());
  }
  RunConfig cfg;
  try {
    cfg.protocol = j.at("protocol").get<std::string>();
    cfg.expert_specs = j.at("experts").get<std::vector<std::string>>();
    cfg.reality_spec = j.at("reality").get<std::string>();
    cfg.horizon = j.at("T").get<std::int64_t>();
    if (j.contains("seeds")) {
      cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    }
    if (j.contains("loss")) cfg.loss_id = j["loss"].get<std::string>();
    if (j.contains("eta")) cfg.eta = j["eta"].get<double>();
    if (j.contains("losses")) {
      cfg.loss_ids = j["losses"].get<std::vector<std::string>>();
    }
    if (j.contains("relation")) {
      for (const json& e : j["relation"]) {
        cfg.relation.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
      }
    }
    if (j.contains("priors")) {
      cfg.priors = j["priors"].get<std::vector<double>>();
    }
    if (j.contains("learner")) {
      const json& l = j["learner"];
      if (l.is_number()) {
        cfg.learner = protocols::LearnerPolicy::fixed_prediction(l.get<double>());
      } else if (l.get<std::string>() != "df") {
        throw ValidationError("learner must be \"df\" or a fixed prediction");
      }
    }
    if (j.contains("output")) {
      const json& o = j["output"];
      if (o.contains("dir")) cfg.out_dir = o["dir"].get<std::string>();
      if (o.contains("prefix")) cfg.prefix = o["prefix"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config field error: ") + e.what());
  }
  if (cfg.horizon < 0) throw ValidationError("config: T must be nonnegative");
  if (cfg.expert_specs.empty()) throw ValidationError("config: no experts");
  return cfg;
}

std::vector<sim::ExpertStrategy> build_experts(const RunConfig& cfg) {
  std::vector<sim::ExpertStrategy> experts;
  experts.reserve(cfg.expert_specs.size());
  for (size_t i = 0; i < cfg.expert_specs.size(); ++i) {
    sim::ExpertStrategy s = sim::ExpertStrategy::parse(cfg.expert_specs[i]);
    if (!s.loss().mixable_at_any_eta() &&
        s.eta() > s.loss().eta_max() * (1.0 + 1e-12)) {
      throw ValidationError("expert " + std::to_string(i) + " ('" +
                            cfg.expert_specs[i] + "'): eta " +
                            std::to_string(s.eta()) +
                            " exceeds the mixability constant of " +
                            s.loss().id());
    }
    experts.push_back(std::move(s));
  }
  return experts;
}

struct SeedRun {
  std::uint64_t seed = 0;
  bool seeded = false;
  protocols::GameResult result;
};

protocols::GameResult run_one(const RunConfig& cfg,
                              std::vector<sim::ExpertStrategy> experts,
                              sim::RealityStrategy reality) {
  if (cfg.protocol == "evaluators") {
    return protocols::run_evaluator_game(std::move(experts), std::move(reality),
                                         cfg.horizon, cfg.learner);
  }
  if (cfg.protocol == "standard") {
    if (!cfg.loss_id) throw ValidationError("standard protocol needs \"loss\"");
    LossSpec loss = LossSpec::parse(*cfg.loss_id);
    const double eta = cfg.eta.value_or(mixability_constant(loss));
    for (auto& e : experts) e.with_loss(loss, eta);
    auto result = protocols::run_evaluator_game(
        std::move(experts), std::move(reality), cfg.horizon, cfg.learner);
    result.transcript.meta.protocol = "standard";
    return result;
  }
  if (cfg.protocol == "constant") {
    std::vector<LossSpec> losses;
    if (!cfg.loss_ids.empty()) {
      for (const auto& id : cfg.loss_ids) losses.push_back(LossSpec::parse(id));
    } else {
      for (const auto& e : experts) losses.push_back(e.loss());
    }
    return protocols::run_constant_evaluator_game(std::move(losses),
                                                  std::move(experts),
                                                  std::move(reality),
                                                  cfg.horizon, cfg.learner);
  }
  if (cfg.protocol == "multiobjective" || cfg.protocol == "bipartite") {
    std::vector<LossSpec> losses;
    for (const auto& id : cfg.loss_ids) losses.push_back(LossSpec::parse(id));
    if (losses.empty()) {
      throw ValidationError(cfg.protocol + " protocol needs \"losses\"");
    }
    std::vector<protocols::VirtualExpert> virt;
    if (cfg.protocol == "multiobjective") {
      virt = protocols::multiobjective_wrap(
          static_cast<int>(experts.size()), losses);
    } else {
      protocols::BipartiteRelation rel;
      rel.num_experts = static_cast<int>(experts.size());
      rel.losses = losses;
      rel.edges = cfg.relation;
      virt = protocols::bipartite_wrap(rel);
    }
    return protocols::run_virtual_game(std::move(experts), virt,
                                       std::move(reality), cfg.horizon,
                                       cfg.learner, cfg.protocol);
  }
  if (cfg.protocol == "specialist") {
    if (!cfg.loss_id) throw ValidationError("specialist protocol needs \"loss\"");
    LossSpec loss = LossSpec::parse(*cfg.loss_id);
    const double eta = cfg.eta.value_or(mixability_constant(loss));
    std::vector<double> priors = cfg.priors;
    if (priors.empty()) {
      priors.assign(experts.size(), 1.0 / experts.size());
    }
    auto sc = specialist::SpecialistConfig::make(std::move(loss), eta,
                                                 std::move(priors));
    if (cfg.learner.kind != protocols::LearnerPolicy::Kind::kDefensive) {
      throw ValidationError("specialist protocol has no baseline learner mode");
    }
    return specialist::run_specialist_game(sc, std::move(experts),
                                           std::move(reality), cfg.horizon);
  }
  throw ValidationError("unknown protocol '" + cfg.protocol + "'");
}

SeedRun run_seeded(const RunConfig& cfg, std::uint64_t seed, bool seeded) {
  std::vector<sim::ExpertStrategy> experts = build_experts(cfg);
  sim::RealityStrategy reality = sim::RealityStrategy::parse(cfg.reality_spec);
  if (seeded) {
    sim::SplitMix64 salts(seed);
    for (auto& e : experts) e.reseed(salts.next_u64());
    reality.reseed(salts.next_u64());
  }
  SeedRun run;
  run.seed = seed;
  run.seeded = seeded;
  run.result = run_one(cfg, std::move(experts), std::move(reality));
  return run;
}

int cmd_run(const fs::path& config_path) {
  const double bound_tol = env_tolerance("DFCAST_BOUND_TOL", 1e-6);
  RunConfig cfg = parse_run_config(config_path);
  build_experts(cfg);  // surface per-expert config errors before any run

  std::vector<std::pair<std::uint64_t, bool>> runs;
  if (cfg.seeds.empty()) {
    runs.emplace_back(0, false);
  } else {
    for (auto s : cfg.seeds) runs.emplace_back(s, true);
  }

  // Independent game instances; a sweep runs them concurrently.  All file
  // writes happen afterwards, serialized, so a failed run leaves no debris.
  std::vector<std::future<SeedRun>> futures;
  futures.reserve(runs.size());
  for (auto [seed, seeded] : runs) {
    futures.push_back(std::async(std::launch::async, run_seeded, std::cref(cfg),
                                 seed, seeded));
  }
  std::vector<SeedRun> results;
  results.reserve(futures.size());
  for (auto& fut : futures) results.push_back(fut.get());

  fs::create_directories(cfg.out_dir);
  bool all_pass = true;
  json combined = json::array();
  std::ofstream report_txt(cfg.out_dir / (cfg.prefix + ".report.txt"));
  for (SeedRun& run : results) {
    const std::string tag =
        run.seeded ? "-s" + std::to_string(run.seed) : std::string();
    {
      std::ofstream os(cfg.out_dir / (cfg.prefix + tag + ".transcript.jsonl"));
      protocols::write_transcript(os, run.result.transcript);
    }
    {
      std::ofstream os(cfg.out_dir / (cfg.prefix + tag + ".curves.tsv"));
      protocols::write_regret_curves(os, run.result.transcript);
    }
    const protocols::Report report =
        protocols::ledger_report(run.result.ledger, bound_tol);
    all_pass = all_pass && report.all_pass;
    report_txt << "== " << cfg.prefix << tag << " ==\n";
    protocols::write_report_text(report_txt, report);
    std::ostringstream js;
    protocols::write_report_json(js, report);
    json entry = json::parse(js.str());
    entry["run"] = cfg.prefix + tag;
    combined.push_back(std::move(entry));
  }
  {
    std::ofstream os(cfg.out_dir / (cfg.prefix + ".report.json"));
    os << combined.dump(2) << '\n';
  }
  std::cout << (all_pass ? "all bounds hold" : "BOUND VIOLATION") << " ("
            << runs.size() << " run" << (runs.size() == 1 ? "" : "s")
            << ", outputs in " << cfg.out_dir.string() << ")\n";
  return all_pass ? kExitPass : kExitViolation;
}

int cmd_verify(const fs::path& transcript_path) {
  const double bound_tol = env_tolerance("DFCAST_BOUND_TOL", 1e-6);
  const double step_tol = env_tolerance("DFCAST_STEP_TOL", 1e-9);
  std::ifstream in(transcript_path);
  if (!in) {
    std::cerr << "cannot open transcript '" << transcript_path.string() << "'\n";
    return kExitUsage;
  }
  protocols::Transcript transcript = protocols::read_transcript(in);
  const protocols::VerifyResult result =
      protocols::verify_transcript(transcript, bound_tol, step_tol);
  if (result.ok) {
    std::cout << "transcript verified: " << transcript.steps.size()
              << " steps, " << transcript.num_experts() << " experts\n";
    return kExitPass;
  }
  for (const auto& issue : result.issues) {
    std::cerr << "step " << issue.step << ": " << issue.what << '\n';
  }
  return kExitViolation;
}

int cmd_check_loss(const std::string& spec, std::optional<double> eta_opt,
                   int grid_n) {
  const LossSpec loss = LossSpec::parse(spec);
  const double eta = eta_opt.value_or(mixability_constant(loss));
  struct Check {
    const char* name;
    bool ok;
  };
  const Check checks[] = {
      {"assumptions (continuity, finite pair, no doubly-infinite point)",
       check_loss_assumptions(loss, grid_n)},
      {"proper scoring rule", check_proper(loss, grid_n)},
      {"eta-mixability", check_eta_mixable(loss, eta, grid_n)},
      {"shift-domination geometry", check_shift_domination(loss, eta, grid_n)},
  };
  bool all = true;
  std::cout << "loss " << loss.id() << " at eta " << eta << " (grid " << grid_n
            << "):\n";
  for (const Check& c : checks) {
    std::cout << "  [" << (c.ok ? "pass" : "FAIL") << "] " << c.name << '\n';
    all = all && c.ok;
  }
  return all ? kExitPass : kExitViolation;
}

int cmd_report(const fs::path& report_path) {
  std::ifstream in(report_path);
  if (!in) {
    std::cerr << "cannot open report '" << report_path.string() << "'\n";
    return kExitUsage;
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    std::cerr << "report parse error: " << e.what() << '\n';
    return kExitUsage;
  }
  bool all_pass = true;
  const json runs = j.is_array() ? j : json::array({j});
  for (const json& entry : runs) {
    if (entry.contains("run")) {
      std::cout << "== " << entry["run"].get<std::string>() << " ==\n";
    }
    std::istringstream is(entry.dump());
    const protocols::Report report = protocols::read_report_json(is);
    protocols::write_report_text(std::cout, report);
    all_pass = all_pass && report.all_pass;
  }
  return all_pass ? kExitPass : kExitViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"defensive forecasting for experts with their own losses"};
  app.require_subcommand(1);

  std::string config_path;
  CLI::App* run = app.add_subcommand("run", "play a configured game and write "
                                            "transcript, report and curves");
  run->add_option("config", config_path, "JSON run config")->required();

  std::string transcript_path;
  CLI::App* verify = app.add_subcommand(
      "verify", "recompute losses and bounds from a recorded transcript");
  verify->add_option("transcript", transcript_path, "transcript (JSONL)")
      ->required();

  std::string loss_spec;
  std::optional<double> eta;
  int grid_n = 1001;
  CLI::App* check = app.add_subcommand(
      "check-loss", "certify properness, mixability and geometry of a loss");
  check->add_option("spec", loss_spec, "loss spec, e.g. square or genlog:0.5")
      ->required();
  check->add_option("--eta", eta, "learning rate (default: mixability constant)");
  check->add_option("--grid", grid_n, "certificate grid size")
      ->check(CLI::Range(3, 100001));

  std::string report_path;
  CLI::App* report = app.add_subcommand("report", "render a ledger report");
  report->add_option("ledger", report_path, "report JSON written by run")
      ->required();

  try {
    app.parse(argc, argv);
    if (run->parsed()) return cmd_run(config_path);
    if (verify->parsed()) return cmd_verify(transcript_path);
    if (check->parsed()) return cmd_check_loss(loss_spec, eta, grid_n);
    if (report->parsed()) return cmd_report(report_path);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitPass : kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const MixabilityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return kExitViolation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
