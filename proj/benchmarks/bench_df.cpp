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

#include <benchmark/benchmark.h>

#include <vector>

#include "dfcast/engine.hpp"
#include "dfcast/loss.hpp"
#include "dfcast/sim.hpp"
#include "dfcast/specialist.hpp"

namespace {

using namespace dfcast;

std::vector<ExpertAdvice> make_advice(int n, sim::SplitMix64& rng) {
  std::vector<ExpertAdvice> advice;
  advice.reserve(n);
  for (int i = 0; i < n; ++i) {
    switch (i % 3) {
      case 0:
        advice.push_back({rng.next_unit(), 1.0, LossSpec::log_loss()});
        break;
      case 1:
        advice.push_back({rng.next_unit(), 2.0, LossSpec::square()});
        break;
      default:
        advice.push_back({rng.next_unit(), 0.5, LossSpec::generalized_log(0.5)});
    }
  }
  return advice;
}

void BM_ChoosePrediction(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  sim::SplitMix64 rng(1);
  EvaluatorState ev(n);
  for (auto _ : state) {
    const auto advice = make_advice(n, rng);
    const StepDecision d = choose_prediction(ev, advice);
    benchmark::DoNotOptimize(d.prediction);
    ev = update_state(ev, advice, d.prediction, rng.next_bernoulli(0.5) ? 1 : 0);
  }
}
BENCHMARK(BM_ChoosePrediction)->Arg(2)->Arg(8)->Arg(32);

void BM_SpecialistStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  sim::SplitMix64 rng(2);
  const auto cfg =
      specialist::SpecialistConfig::uniform(LossSpec::square(), 2.0, n);
  specialist::SpecialistState sp(cfg);
  std::vector<int> awake(n);
  std::vector<double> preds(n);
  for (int i = 0; i < n; ++i) awake[i] = i;
  for (auto _ : state) {
    for (int i = 0; i < n; ++i) preds[i] = rng.next_unit();
    const double pi = specialist_predict(sp, cfg, awake, preds);
    benchmark::DoNotOptimize(pi);
    sp = specialist_update(sp, cfg, awake, preds, pi,
                           rng.next_bernoulli(0.5) ? 1 : 0);
  }
}
BENCHMARK(BM_SpecialistStep)->Arg(4)->Arg(16);

void BM_Substitution(benchmark::State& state) {
  sim::SplitMix64 rng(3);
  const LossSpec loss = LossSpec::square();
  std::vector<double> w{0.25, 0.25, 0.25, 0.25};
  std::vector<double> g(4);
  for (auto _ : state) {
    for (double& gi : g) gi = rng.next_unit();
    benchmark::DoNotOptimize(substitution(loss, 2.0, w, g));
  }
}
BENCHMARK(BM_Substitution);

void BM_MixabilityCertificate(benchmark::State& state) {
  const LossSpec loss = LossSpec::square();
  for (auto _ : state) {
    benchmark::DoNotOptimize(check_eta_mixable(loss, 2.0, 301));
  }
}
BENCHMARK(BM_MixabilityCertificate);

}  // namespace

BENCHMARK_MAIN();
