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

#include <cmath>
#include <vector>

#include "dfcast/loss.hpp"
#include "dfcast/sim.hpp"
#include "oracles.hpp"

using namespace dfcast;

namespace {

const LossFn kMirroredSquare = [](double g, int w) {
  const double d = 1.0 - g - static_cast<double>(w);
  return d * d;
};

std::vector<LossSpec> builtin_losses() {
  return {LossSpec::log_loss(), LossSpec::square(),
          LossSpec::generalized_log(0.5), LossSpec::zero()};
}

}  // namespace

TEST_CASE("evaluate matches the closed forms") {
  const LossSpec log = LossSpec::log_loss();
  const LossSpec sq = LossSpec::square();
  CHECK(log(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(sq(0.3, 1) == doctest::Approx(0.49).epsilon(1e-12));
  CHECK(std::isinf(log(0.0, 1)));
  CHECK(log(0.0, 0) == 0.0);
  CHECK(sq(1.0, 1) == 0.0);
  CHECK(LossSpec::zero()(0.3, 1) == 0.0);

  const LossSpec gl = LossSpec::generalized_log(0.5);
  CHECK(gl(0.5, 1) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

  const LossSpec scaled = LossSpec::scaled(LossSpec::log_loss(), 2.0);
  CHECK(scaled(0.5, 1) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(std::isinf(scaled(0.0, 1)));
}

TEST_CASE("generalized log is a scaled log loss") {
  const LossSpec gl = LossSpec::generalized_log(0.4);
  const LossSpec scaled = LossSpec::scaled(LossSpec::log_loss(), 2.5);
  for (int i = 0; i <= 20; ++i) {
    const double g = i / 20.0;
    for (int w : {0, 1}) {
      if (std::isinf(gl(g, w))) {
        CHECK(std::isinf(scaled(g, w)));
      } else {
        CHECK(gl(g, w) == doctest::Approx(scaled(g, w)).epsilon(1e-12));
      }
    }
  }
  CHECK(gl.eta_max() == doctest::Approx(scaled.eta_max()).epsilon(1e-12));
}

TEST_CASE("mixability constants of the catalogue") {
  CHECK(mixability_constant(LossSpec::log_loss()) == 1.0);
  CHECK(mixability_constant(LossSpec::square()) == 2.0);
  CHECK(mixability_constant(LossSpec::zero()) == 1.0);
  CHECK(mixability_constant(LossSpec::scaled(LossSpec::square(), 4.0)) ==
        doctest::Approx(0.5));

  // The generalized-log constant is certified, not just declared: the
  // certificate accepts it at its own eta and rejects a 10% bump.
  const LossSpec gl = LossSpec::generalized_log(0.5);
  CHECK(mixability_constant(gl) == 0.5);
  CHECK(check_eta_mixable(gl, 0.5, 1001));
  CHECK_FALSE(check_eta_mixable(gl, 0.55, 1001));
}

TEST_CASE("mixability certificate agrees with the brute-force chord oracle") {
  // True cases at the exact constants.
  CHECK(check_eta_mixable(LossSpec::square(), 2.0, 1001));
  CHECK(check_eta_mixable(LossSpec::log_loss(), 1.0, 1001));
  CHECK(check_eta_mixable(LossSpec::zero(), 1.0, 3));
  CHECK_FALSE(oracles::find_chord_violation(as_fn(LossSpec::square()), 2.0, 201)
                  .has_value());

  // Above the constant the oracle exhibits a violating chord and the
  // certificate must reject as well.
  const auto violation =
      oracles::find_chord_violation(as_fn(LossSpec::square()), 2.2, 201);
  REQUIRE(violation.has_value());
  CHECK(violation->margin < -1e-6);  // macroscopic, far beyond tolerance
  CHECK_FALSE(check_eta_mixable(LossSpec::square(), 2.2, 1001));

  const auto log_violation =
      oracles::find_chord_violation(as_fn(LossSpec::log_loss()), 1.1, 201);
  REQUIRE(log_violation.has_value());
  CHECK_FALSE(check_eta_mixable(LossSpec::log_loss(), 1.1, 1001));
}

TEST_CASE("mixability certificate is sharp at the constants") {
  // At the default grid the certificate flips within 1% of the true constant.
  CHECK(check_eta_mixable(LossSpec::square(), 2.0, 1001));
  CHECK_FALSE(check_eta_mixable(LossSpec::square(), 2.02, 1001));
  CHECK(check_eta_mixable(LossSpec::log_loss(), 1.0, 1001));
  CHECK_FALSE(check_eta_mixable(LossSpec::log_loss(), 1.01, 1001));
}

TEST_CASE("mixability certificate handles a degenerate flat coordinate") {
  // Constant loss for outcome 0: the image curve is a vertical segment and
  // the region below-left of it is a rectangle, convex at any eta.
  const LossFn flat0 = [](double g, int w) {
    return w == 0 ? 0.5 : (1.0 - g) * (1.0 - g);
  };
  CHECK(check_eta_mixable(flat0, 1.0, 101));
  CHECK(check_eta_mixable(flat0, 5.0, 101));
}

TEST_CASE("properness certificate") {
  CHECK(check_proper(LossSpec::log_loss(), 101));
  CHECK(check_proper(LossSpec::square(), 101));
  CHECK(check_proper(LossSpec::generalized_log(0.5), 101));
  CHECK(check_proper(LossSpec::zero(), 101));
  // Positive scaling preserves properness.
  CHECK(check_proper(LossSpec::scaled(LossSpec::square(), 3.0), 101));

  // The mirrored square is not proper: under belief 0.2 the truthful
  // prediction is beaten by predicting 0.8 (expected losses 0.52 vs 0.16).
  CHECK(oracles::expected_loss(kMirroredSquare, 0.2, 0.2) ==
        doctest::Approx(0.52).epsilon(1e-12));
  CHECK(oracles::expected_loss(kMirroredSquare, 0.2, 0.8) ==
        doctest::Approx(0.16).epsilon(1e-12));
  CHECK_FALSE(check_proper(kMirroredSquare, 101));
}

TEST_CASE("standing assumptions hold on the catalogue") {
  for (const LossSpec& loss : builtin_losses()) {
    CAPTURE(loss.id());
    CHECK(check_loss_assumptions(loss, 1001));
  }
  // A genuine jump discontinuity is caught.
  const LossFn jumpy = [](double g, int w) {
    const double base = (w - g) * (w - g);
    return g > 0.5 ? base + 1.0 : base;
  };
  CHECK_FALSE(check_loss_assumptions(jumpy, 1001));
  // A doubly-infinite point is caught.
  const LossFn doubly_infinite = [](double g, int) {
    return g == 0.0 ? kInf : 1.0;
  };
  CHECK_FALSE(check_loss_assumptions(doubly_infinite, 1001));
}

TEST_CASE("superprediction membership") {
  const LossSpec sq = LossSpec::square();
  CHECK(superprediction_contains(sq, {1.0, 1.0}));
  CHECK_FALSE(superprediction_contains(sq, {0.01, 0.01}));
  const double ln2 = std::log(2.0);
  CHECK(superprediction_contains(LossSpec::log_loss(), {ln2, ln2}));
  // Just inside / just outside the boundary point (0.25, 0.25).
  CHECK(superprediction_contains(sq, {0.25, 0.25}));
  CHECK_FALSE(superprediction_contains(sq, {0.2499, 0.2499}));
}

TEST_CASE("shift pi-point") {
  const double ln2 = std::log(2.0);
  auto p = shift_pi_point(1.0, 0.5);
  CHECK(p.first == doctest::Approx(ln2).epsilon(1e-12));
  CHECK(p.second == doctest::Approx(ln2).epsilon(1e-12));
  p = shift_pi_point(2.0, 0.5);
  CHECK(p.first == doctest::Approx(ln2 / 2).epsilon(1e-12));
  p = shift_pi_point(1.0, 0.9);
  CHECK(p.first == doctest::Approx(2.302585092994046).epsilon(1e-12));
  CHECK(p.second == doctest::Approx(0.10536051565782628).epsilon(1e-12));
  CHECK_THROWS_AS(shift_pi_point(1.0, 0.0), ValidationError);
  CHECK_THROWS_AS(shift_pi_point(1.0, 1.0), ValidationError);
}

TEST_CASE("shift-domination geometry for proper mixable losses") {
  CHECK(check_shift_domination(LossSpec::log_loss(), 1.0, 301));
  CHECK(check_shift_domination(LossSpec::square(), 2.0, 301));
  CHECK(check_shift_domination(LossSpec::generalized_log(0.5), 0.5, 301));
  // Fails above the mixability constant.
  CHECK_FALSE(check_shift_domination(LossSpec::square(), 2.5, 301));
}

TEST_CASE("substitution: worked examples") {
  const LossSpec log = LossSpec::log_loss();
  const std::vector<double> w{0.5, 0.5};

  // Log loss mixes to the posterior average, with equality in the contract.
  const std::vector<double> g1{0.2, 0.6};
  const double pi1 = substitution(log, 1.0, w, g1);
  CHECK(pi1 == doctest::Approx(0.4).epsilon(1e-9));
  for (int omega : {0, 1}) {
    double mix = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
      mix += w[i] * std::exp(-log(g1[i], omega));
    }
    CHECK(std::exp(-log(pi1, omega)) == doctest::Approx(mix).epsilon(1e-9));
  }

  // Square loss, opposite extremes: symmetry forces the midpoint, and its
  // loss 0.25 stays below the mix level -0.5 ln((1+e^{-2})/2).
  const std::vector<double> g2{0.0, 1.0};
  const double pi2 = substitution(LossSpec::square(), 2.0, w, g2);
  CHECK(pi2 == doctest::Approx(0.5).epsilon(1e-9));
  const double mix_level = -0.5 * std::log((1.0 + std::exp(-2.0)) / 2.0);
  CHECK(0.25 <= mix_level);
  CHECK(LossSpec::square()(pi2, 0) <= mix_level + 1e-9);

  // Single expert passes through; the empty set gives the fixed default.
  const std::vector<double> w1{1.0}, g3{0.7};
  CHECK(substitution(log, 1.0, w1, g3) == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(substitution(log, 1.0, {}, {}) == 0.5);
}

TEST_CASE("substitution: endpoint and degenerate inputs") {
  const LossSpec log = LossSpec::log_loss();
  const std::vector<double> w{0.5, 0.5};
  // All experts at 0: the only dominating prediction is 0 itself.
  const std::vector<double> zeros{0.0, 0.0};
  CHECK(substitution(log, 1.0, w, zeros) == doctest::Approx(0.0).epsilon(1e-9));
  const std::vector<double> ones{1.0, 1.0};
  CHECK(substitution(log, 1.0, w, ones) == doctest::Approx(1.0).epsilon(1e-9));
  // Mixed extremes under log loss: the mix point is (ln 2, ln 2).
  const std::vector<double> both{0.0, 1.0};
  CHECK(substitution(log, 1.0, w, both) == doctest::Approx(0.5).epsilon(1e-9));
  // Zero loss accepts anything; the contract holds trivially.
  const double pz = substitution(LossSpec::zero(), 3.0, w, both);
  CHECK(substitution_holds(LossSpec::zero(), 3.0, w, both, pz));
}

TEST_CASE("substitution: validation and mixability errors") {
  const LossSpec sq = LossSpec::square();
  const std::vector<double> w{0.5, 0.5}, g{0.2, 0.8};
  CHECK_THROWS_AS(substitution(sq, 2.5, w, g), MixabilityError);
  const std::vector<double> bad_sum{0.5, 0.4};
  CHECK_THROWS_AS(substitution(sq, 2.0, bad_sum, g), ValidationError);
  const std::vector<double> short_w{1.0};
  CHECK_THROWS_AS(substitution(sq, 2.0, short_w, g), ValidationError);
  const std::vector<double> neg{1.5, -0.5};
  CHECK_THROWS_AS(substitution(sq, 2.0, neg, g), ValidationError);
}

TEST_CASE("substitution contract over random weighted sets") {
  sim::SplitMix64 rng(20260810);
  for (const LossSpec& loss : builtin_losses()) {
    CAPTURE(loss.id());
    const double eta = mixability_constant(loss);
    for (int rep = 0; rep < 10000; ++rep) {
      const int k = 1 + static_cast<int>(rng.next_u64() % 5);
      std::vector<double> w(k), g(k);
      double total = 0.0;
      for (int i = 0; i < k; ++i) {
        w[i] = rng.next_unit() + 1e-3;
        total += w[i];
        // Occasionally pin predictions to the endpoints.
        const double u = rng.next_unit();
        g[i] = u < 0.05 ? 0.0 : (u > 0.95 ? 1.0 : rng.next_unit());
      }
      for (int i = 0; i < k; ++i) w[i] /= total;
      const double pi = substitution(loss, eta, w, g);
      REQUIRE(is_valid_prediction(pi));
      // The contract, in the exponentiated image domain.
      for (int omega : {0, 1}) {
        double mix = 0.0;
        for (int i = 0; i < k; ++i) {
          mix += w[i] * std::exp(-eta * loss(g[i], omega));
        }
        REQUIRE(std::exp(-eta * loss(pi, omega)) >= mix - 1e-9);
      }
    }
  }
}

TEST_CASE("loss spec text forms round-trip") {
  for (const char* id :
       {"log", "square", "zero", "genlog:0.5", "genlog:2", "scaled:2:log",
        "scaled:0.5:genlog:2", "scaled:3:scaled:2:square"}) {
    const LossSpec loss = LossSpec::parse(id);
    CHECK(loss.id() == id);
    CHECK(LossSpec::parse(loss.id()) == loss);
  }
  CHECK_THROWS_AS(LossSpec::parse("brier"), ValidationError);
  CHECK_THROWS_AS(LossSpec::parse("genlog:-1"), ValidationError);
  CHECK_THROWS_AS(LossSpec::parse("genlog:abc"), ValidationError);
  CHECK_THROWS_AS(LossSpec::parse("scaled:2"), ValidationError);
  CHECK_THROWS_AS(LossSpec::parse("scaled:0:log"), ValidationError);
}
