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

#ifndef DFCAST_SIM_HPP_
#define DFCAST_SIM_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "dfcast/engine.hpp"
#include "dfcast/loss.hpp"

namespace dfcast::sim {

// SplitMix64: the full generator state is one 64-bit word and the update is
// fixed integer arithmetic, so streams are bit-identical on every platform.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) from the top 53 bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool next_bernoulli(double p) { return next_unit() < p; }

 private:
  std::uint64_t state_;
};

// How a sleeper decides whether it is awake at (1-based) step t.
struct SleepPattern {
  enum class Kind { kAlways, kEven, kOdd, kEveryK, kRandom };
  Kind kind = Kind::kAlways;
  int k = 1;             // kEveryK: awake when t % k == 0
  double p_awake = 0.5;  // kRandom
  std::uint64_t seed = 0;

  static SleepPattern parse(std::string_view text);
  std::string to_string() const;
};

// Expert behaviors for driving the protocols.  A strategy is a plain value
// that owns its RNG stream: a copy replays the same moves, and a strategy is
// deterministic given its spec, seed, and the steps consumed so far.
class ExpertStrategy {
 public:
  enum class Kind { kConstant, kIIDUniform, kDrift, kScripted, kSleeper };

  ExpertStrategy() = default;
  ExpertStrategy(const ExpertStrategy& other);
  ExpertStrategy& operator=(const ExpertStrategy& other);
  ExpertStrategy(ExpertStrategy&&) = default;
  ExpertStrategy& operator=(ExpertStrategy&&) = default;

  static ExpertStrategy constant(double gamma);
  static ExpertStrategy iid_uniform(std::uint64_t seed);
  static ExpertStrategy drift(double start, double rate);
  static ExpertStrategy scripted(std::vector<double> values, bool cycle = false);
  static ExpertStrategy sleeper(ExpertStrategy base, SleepPattern pattern);

  // Text form: "<kind>[@<loss>[:eta=<x>]]", e.g. "constant:0.7@log:eta=1",
  // "iid:seed=3@square", "drift:0.1:0.002", "scripted:0.1,0.9:cycle",
  // "sleeper:even(constant:0.7)@log".  Omitted eta defaults to the loss's
  // mixability constant; omitted loss defaults to the log loss.
  static ExpertStrategy parse(std::string_view text);
  std::string to_string() const;

  ExpertStrategy& with_loss(LossSpec loss, double eta);
  ExpertStrategy& with_loss(LossSpec loss);

  const LossSpec& loss() const { return loss_; }
  double eta() const { return eta_; }
  Kind kind() const { return kind_; }

  // The move at step t (1-based).  Throws ValidationError when a non-cycling
  // script runs out.  Advances the internal RNG stream.
  ExpertAdvice next_advice(std::int64_t t);

  // Rebase every RNG stream on declared_seed ^ salt (sleep stream and wrapped
  // base get derived salts).  Used by seed sweeps; a zero-salt reseed restores
  // the declared streams.
  void reseed(std::uint64_t salt);

 private:
  Kind kind_ = Kind::kConstant;
  double constant_ = 0.5;
  std::uint64_t seed_ = 0;
  double drift_start_ = 0.5, drift_rate_ = 0.0;
  std::vector<double> script_;
  bool script_cycles_ = false;
  SleepPattern sleep_;
  std::unique_ptr<ExpertStrategy> base_;  // kSleeper wraps another strategy

  LossSpec loss_ = LossSpec::log_loss();
  double eta_ = 1.0;

  SplitMix64 rng_{0};
  SplitMix64 sleep_rng_{0};

  std::string kind_string() const;
  double next_gamma(std::int64_t t);
};

class RealityStrategy {
 public:
  enum class Kind { kBernoulli, kScripted, kGreedyAdversary };

  static RealityStrategy bernoulli(double p, std::uint64_t seed);
  static RealityStrategy scripted(std::vector<int> outcomes, bool cycle = false);
  static RealityStrategy greedy_adversary(LossSpec target);

  // Text form: "bernoulli:0.5:seed=1", "scripted:0,1,1[:cycle]",
  // "adversary:<loss>".
  static RealityStrategy parse(std::string_view text);
  std::string to_string() const;

  Kind kind() const { return kind_; }

  // The outcome at step t, after seeing the learner's prediction.  The greedy
  // adversary picks the outcome maximizing the learner's instantaneous loss
  // under its target loss, breaking ties toward 1.
  int next_outcome(std::int64_t t, double learner_prediction);

  void reseed(std::uint64_t salt);

 private:
  Kind kind_ = Kind::kBernoulli;
  double p_ = 0.5;
  std::uint64_t seed_ = 0;
  std::vector<int> script_;
  bool script_cycles_ = false;
  LossSpec target_ = LossSpec::log_loss();
  SplitMix64 rng_{0};
};

}  // namespace dfcast::sim

#endif  // DFCAST_SIM_HPP_
