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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "dfcast/protocols.hpp"
#include "dfcast/sim.hpp"

using namespace dfcast;
using sim::ExpertStrategy;
using sim::RealityStrategy;

TEST_CASE("constant strategy always emits its value") {
  ExpertStrategy s = ExpertStrategy::parse("constant:0.7@log:eta=1");
  for (int t = 1; t <= 5; ++t) {
    const ExpertAdvice a = s.next_advice(t);
    CHECK(a.prediction == 0.7);
    CHECK(a.eta == 1.0);
    CHECK(a.loss.id() == "log");
  }
}

TEST_CASE("sleeper abstains off-pattern") {
  ExpertStrategy s = ExpertStrategy::parse("sleeper:even(constant:0.7)@log");
  for (int t = 1; t <= 6; ++t) {
    const ExpertAdvice a = s.next_advice(t);
    if (t % 2 == 0) {
      CHECK(a.prediction == 0.7);
    } else {
      CHECK(a.abstains());
    }
  }
  ExpertStrategy every3 = ExpertStrategy::parse("sleeper:every:3(constant:0.5)");
  int awake = 0;
  for (int t = 1; t <= 9; ++t) awake += every3.next_advice(t).abstains() ? 0 : 1;
  CHECK(awake == 3);
}

TEST_CASE("scripted strategy: exhaustion errors, cycling repeats") {
  ExpertStrategy strict = ExpertStrategy::parse("scripted:0.1,0.9@log");
  CHECK(strict.next_advice(1).prediction == 0.1);
  CHECK(strict.next_advice(2).prediction == 0.9);
  CHECK_THROWS_AS(strict.next_advice(3), ValidationError);

  ExpertStrategy cyclic = ExpertStrategy::parse("scripted:0.1,0.9:cycle@log");
  cyclic.next_advice(1);
  cyclic.next_advice(2);
  CHECK(cyclic.next_advice(3).prediction == 0.1);
  CHECK(cyclic.next_advice(4).prediction == 0.9);
}

TEST_CASE("drift clamps to the unit interval") {
  ExpertStrategy s = ExpertStrategy::parse("drift:0.9:0.05@log");
  CHECK(s.next_advice(1).prediction == doctest::Approx(0.9));
  CHECK(s.next_advice(3).prediction == doctest::Approx(1.0));
  CHECK(s.next_advice(100).prediction == doctest::Approx(1.0));
}

TEST_CASE("greedy adversary maximizes the learner's instantaneous loss") {
  RealityStrategy log_adv = RealityStrategy::parse("adversary:log");
  CHECK(log_adv.next_outcome(1, 0.3) == 1);  // -ln 0.3 > -ln 0.7
  CHECK(log_adv.next_outcome(2, 0.8) == 0);
  RealityStrategy sq_adv = RealityStrategy::parse("adversary:square");
  CHECK(sq_adv.next_outcome(1, 0.5) == 1);  // tie goes to 1

  // Never worse than the alternative outcome.
  const LossSpec log = LossSpec::log_loss();
  sim::SplitMix64 rng(5);
  for (int rep = 0; rep < 1000; ++rep) {
    const double pi = rng.next_unit();
    const int w = log_adv.next_outcome(rep, pi);
    CHECK(log(pi, w) >= log(pi, 1 - w));
  }
}

TEST_CASE("scripted reality: exhaustion errors, cycling repeats") {
  RealityStrategy strict = RealityStrategy::parse("scripted:0,1");
  CHECK(strict.next_outcome(1, 0.5) == 0);
  CHECK(strict.next_outcome(2, 0.5) == 1);
  CHECK_THROWS_AS(strict.next_outcome(3, 0.5), ValidationError);
  RealityStrategy cyclic = RealityStrategy::parse("scripted:0,1:cycle");
  cyclic.next_outcome(1, 0.5);
  cyclic.next_outcome(2, 0.5);
  CHECK(cyclic.next_outcome(3, 0.5) == 0);
}

TEST_CASE("bernoulli reality is seeded and degenerate at p=1") {
  RealityStrategy always = RealityStrategy::parse("bernoulli:1");
  for (int t = 1; t <= 20; ++t) CHECK(always.next_outcome(t, 0.5) == 1);

  RealityStrategy a = RealityStrategy::parse("bernoulli:0.5:seed=7");
  RealityStrategy b = RealityStrategy::parse("bernoulli:0.5:seed=7");
  for (int t = 1; t <= 100; ++t) {
    CHECK(a.next_outcome(t, 0.5) == b.next_outcome(t, 0.5));
  }
}

TEST_CASE("identical specs and seeds give bit-identical transcripts") {
  const auto game = [] {
    std::vector<ExpertStrategy> experts{
        ExpertStrategy::parse("iid:seed=11@log:eta=1"),
        ExpertStrategy::parse("sleeper:random:0.7:seed=3(iid:seed=5)@square:eta=2"),
    };
    return protocols::run_evaluator_game(
        std::move(experts), RealityStrategy::parse("bernoulli:0.4:seed=9"), 200);
  };
  std::ostringstream first, second;
  protocols::write_transcript(first, game().transcript);
  protocols::write_transcript(second, game().transcript);
  CHECK(first.str() == second.str());
}

TEST_CASE("reseeding changes streams reproducibly") {
  ExpertStrategy a = ExpertStrategy::parse("iid:seed=11@log");
  ExpertStrategy b = a;
  b.reseed(42);
  ExpertStrategy c = ExpertStrategy::parse("iid:seed=11@log");
  c.reseed(42);
  bool any_diff = false;
  for (int t = 1; t <= 50; ++t) {
    const double va = *a.next_advice(t).prediction;
    const double vb = *b.next_advice(t).prediction;
    const double vc = *c.next_advice(t).prediction;
    CHECK(vb == vc);
    any_diff = any_diff || va != vb;
  }
  CHECK(any_diff);
}

TEST_CASE("strategy spec round-trips") {
  for (const char* spec :
       {"constant:0.7@log:eta=1", "iid:seed=3@square:eta=2",
        "drift:0.1:0.002@log:eta=1", "scripted:0.1,0.9:cycle@genlog:0.5:eta=0.5",
        "sleeper:even(constant:0.7)@log:eta=1",
        "sleeper:random:0.25:seed=8(iid:seed=2)@square:eta=2"}) {
    ExpertStrategy s = ExpertStrategy::parse(spec);
    CHECK(s.to_string() == spec);
  }
  CHECK(ExpertStrategy::parse("constant:0.7").to_string() ==
        "constant:0.7@log:eta=1");
  // Default eta is the mixability constant of the attached loss.
  CHECK(ExpertStrategy::parse("constant:0.7@square").eta() == 2.0);

  for (const char* spec :
       {"bernoulli:0.5:seed=1", "scripted:0,1,1", "adversary:log"}) {
    CHECK(RealityStrategy::parse(spec).to_string() == spec);
  }

  CHECK_THROWS_AS(ExpertStrategy::parse("constant:1.5"), ValidationError);
  CHECK_THROWS_AS(ExpertStrategy::parse("warp:0.5"), ValidationError);
  CHECK_THROWS_AS(ExpertStrategy::parse("iid:junk=1"), ValidationError);
  CHECK_THROWS_AS(ExpertStrategy::parse("sleeper:odd(constant:0.5"),
                  ValidationError);
  CHECK_THROWS_AS(RealityStrategy::parse("bernoulli:2"), ValidationError);
  CHECK_THROWS_AS(RealityStrategy::parse("scripted:0,2"), ValidationError);
}
