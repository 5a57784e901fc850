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

#include "dfcast/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace dfcast::sim {
namespace {

double parse_real(std::string_view text, const char* what) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw ValidationError(std::string("strategy spec: bad ") + what + " '" +
                          std::string(text) + "'");
  }
  return value;
}

std::uint64_t parse_u64(std::string_view text, const char* what) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ValidationError(std::string("strategy spec: bad ") + what + " '" +
                          std::string(text) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(text.substr(start));
      return out;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

// Strips a trailing ":seed=<n>" if present.
std::string_view take_seed(std::string_view text, std::uint64_t* seed) {
  const size_t pos = text.rfind(":seed=");
  if (pos == std::string_view::npos) return text;
  *seed = parse_u64(text.substr(pos + 6), "seed");
  return text.substr(0, pos);
}

std::string format_real(double x) {
  for (int prec = 1; prec <= 17; ++prec) {
    std::ostringstream os;
    os.precision(prec);
    os << x;
    if (std::stod(os.str()) == x) return os.str();
  }
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// SleepPattern

SleepPattern SleepPattern::parse(std::string_view text) {
  SleepPattern p;
  std::uint64_t seed = 0;
  text = take_seed(text, &seed);
  p.seed = seed;
  if (text == "always") {
    p.kind = Kind::kAlways;
  } else if (text == "even") {
    p.kind = Kind::kEven;
  } else if (text == "odd") {
    p.kind = Kind::kOdd;
  } else if (text.substr(0, 6) == "every:") {
    p.kind = Kind::kEveryK;
    p.k = static_cast<int>(parse_u64(text.substr(6), "period"));
    if (p.k < 1) throw ValidationError("sleep pattern: period must be >= 1");
  } else if (text.substr(0, 7) == "random:") {
    p.kind = Kind::kRandom;
    p.p_awake = parse_real(text.substr(7), "awake probability");
    if (p.p_awake < 0.0 || p.p_awake > 1.0) {
      throw ValidationError("sleep pattern: awake probability must be in [0,1]");
    }
  } else {
    throw ValidationError("unknown sleep pattern '" + std::string(text) + "'");
  }
  return p;
}

std::string SleepPattern::to_string() const {
  std::string out;
  switch (kind) {
    case Kind::kAlways: out = "always"; break;
    case Kind::kEven: out = "even"; break;
    case Kind::kOdd: out = "odd"; break;
    case Kind::kEveryK: out = "every:" + std::to_string(k); break;
    case Kind::kRandom: out = "random:" + format_real(p_awake); break;
  }
  if (kind == Kind::kRandom) out += ":seed=" + std::to_string(seed);
  return out;
}

// ---------------------------------------------------------------------------
// ExpertStrategy

ExpertStrategy::ExpertStrategy(const ExpertStrategy& other)
    : kind_(other.kind_), constant_(other.constant_), seed_(other.seed_),
      drift_start_(other.drift_start_), drift_rate_(other.drift_rate_),
      script_(other.script_), script_cycles_(other.script_cycles_),
      sleep_(other.sleep_),
      base_(other.base_ ? std::make_unique<ExpertStrategy>(*other.base_) : nullptr),
      loss_(other.loss_), eta_(other.eta_), rng_(other.rng_),
      sleep_rng_(other.sleep_rng_) {}

ExpertStrategy& ExpertStrategy::operator=(const ExpertStrategy& other) {
  if (this == &other) return *this;
  ExpertStrategy copy(other);
  *this = std::move(copy);
  return *this;
}

ExpertStrategy ExpertStrategy::constant(double gamma) {
  if (!is_valid_prediction(gamma)) {
    throw ValidationError("constant strategy: prediction must lie in [0,1]");
  }
  ExpertStrategy s;
  s.kind_ = Kind::kConstant;
  s.constant_ = gamma;
  return s;
}

ExpertStrategy ExpertStrategy::iid_uniform(std::uint64_t seed) {
  ExpertStrategy s;
  s.kind_ = Kind::kIIDUniform;
  s.seed_ = seed;
  s.rng_ = SplitMix64(seed);
  return s;
}

ExpertStrategy ExpertStrategy::drift(double start, double rate) {
  if (!is_valid_prediction(start)) {
    throw ValidationError("drift strategy: start must lie in [0,1]");
  }
  ExpertStrategy s;
  s.kind_ = Kind::kDrift;
  s.drift_start_ = start;
  s.drift_rate_ = rate;
  return s;
}

ExpertStrategy ExpertStrategy::scripted(std::vector<double> values, bool cycle) {
  if (values.empty()) throw ValidationError("scripted strategy: empty script");
  for (double v : values) {
    if (!is_valid_prediction(v)) {
      throw ValidationError("scripted strategy: predictions must lie in [0,1]");
    }
  }
  ExpertStrategy s;
  s.kind_ = Kind::kScripted;
  s.script_ = std::move(values);
  s.script_cycles_ = cycle;
  return s;
}

ExpertStrategy ExpertStrategy::sleeper(ExpertStrategy base, SleepPattern pattern) {
  if (base.kind_ == Kind::kSleeper) {
    throw ValidationError("sleeper strategy: nested sleepers are not supported");
  }
  ExpertStrategy s;
  s.kind_ = Kind::kSleeper;
  s.sleep_ = pattern;
  s.sleep_rng_ = SplitMix64(pattern.seed);
  s.base_ = std::make_unique<ExpertStrategy>(std::move(base));
  return s;
}

ExpertStrategy& ExpertStrategy::with_loss(LossSpec loss, double eta) {
  loss_ = std::move(loss);
  eta_ = eta;
  return *this;
}

ExpertStrategy& ExpertStrategy::with_loss(LossSpec loss) {
  eta_ = mixability_constant(loss);
  loss_ = std::move(loss);
  return *this;
}

namespace {

ExpertStrategy parse_kind(std::string_view text) {
  if (text.substr(0, 9) == "constant:") {
    return ExpertStrategy::constant(parse_real(text.substr(9), "prediction"));
  }
  if (text == "iid" || text.substr(0, 4) == "iid:") {
    std::uint64_t seed = 0;
    if (text != "iid" && take_seed(text, &seed) != "iid") {
      throw ValidationError("iid strategy takes only ':seed=<n>', got '" +
                            std::string(text) + "'");
    }
    return ExpertStrategy::iid_uniform(seed);
  }
  if (text.substr(0, 6) == "drift:") {
    const auto parts = split(text.substr(6), ':');
    if (parts.size() != 2) {
      throw ValidationError("drift strategy needs 'drift:<start>:<rate>'");
    }
    return ExpertStrategy::drift(parse_real(parts[0], "start"),
                                 parse_real(parts[1], "rate"));
  }
  if (text.substr(0, 9) == "scripted:") {
    std::string_view rest = text.substr(9);
    bool cycle = false;
    if (rest.size() > 6 && rest.substr(rest.size() - 6) == ":cycle") {
      cycle = true;
      rest = rest.substr(0, rest.size() - 6);
    }
    std::vector<double> values;
    for (auto piece : split(rest, ',')) {
      values.push_back(parse_real(piece, "scripted prediction"));
    }
    return ExpertStrategy::scripted(std::move(values), cycle);
  }
  if (text.substr(0, 8) == "sleeper:") {
    const size_t open = text.find('(');
    if (open == std::string_view::npos || text.back() != ')') {
      throw ValidationError("sleeper strategy needs 'sleeper:<pattern>(<base>)'");
    }
    const SleepPattern pattern = SleepPattern::parse(text.substr(8, open - 8));
    ExpertStrategy base = parse_kind(text.substr(open + 1, text.size() - open - 2));
    return ExpertStrategy::sleeper(std::move(base), pattern);
  }
  throw ValidationError("unknown expert strategy '" + std::string(text) + "'");
}

}  // namespace

ExpertStrategy ExpertStrategy::parse(std::string_view text) {
  std::string_view kind_part = text;
  std::string_view loss_part;
  const size_t at = text.find('@');
  if (at != std::string_view::npos) {
    kind_part = text.substr(0, at);
    loss_part = text.substr(at + 1);
  }
  ExpertStrategy s = parse_kind(kind_part);
  if (!loss_part.empty()) {
    const size_t eta_pos = loss_part.rfind(":eta=");
    if (eta_pos != std::string_view::npos) {
      const double eta = parse_real(loss_part.substr(eta_pos + 5), "eta");
      s.with_loss(LossSpec::parse(loss_part.substr(0, eta_pos)), eta);
    } else {
      s.with_loss(LossSpec::parse(loss_part));
    }
  }
  return s;
}

std::string ExpertStrategy::kind_string() const {
  switch (kind_) {
    case Kind::kConstant:
      return "constant:" + format_real(constant_);
    case Kind::kIIDUniform:
      return "iid:seed=" + std::to_string(seed_);
    case Kind::kDrift:
      return "drift:" + format_real(drift_start_) + ":" + format_real(drift_rate_);
    case Kind::kScripted: {
      std::string out = "scripted:";
      for (size_t i = 0; i < script_.size(); ++i) {
        if (i) out += ',';
        out += format_real(script_[i]);
      }
      if (script_cycles_) out += ":cycle";
      return out;
    }
    case Kind::kSleeper:
      return "sleeper:" + sleep_.to_string() + "(" + base_->kind_string() + ")";
  }
  return {};
}

std::string ExpertStrategy::to_string() const {
  return kind_string() + "@" + loss_.id() + ":eta=" + format_real(eta_);
}

void ExpertStrategy::reseed(std::uint64_t salt) {
  rng_ = SplitMix64(seed_ ^ salt);
  sleep_rng_ = SplitMix64(sleep_.seed ^ (salt * 0x9e3779b97f4a7c15ULL + 1));
  if (base_) base_->reseed(salt * 0x9e3779b97f4a7c15ULL + 2);
}

double ExpertStrategy::next_gamma(std::int64_t t) {
  switch (kind_) {
    case Kind::kConstant:
      return constant_;
    case Kind::kIIDUniform:
      return rng_.next_unit();
    case Kind::kDrift:
      return std::clamp(drift_start_ + drift_rate_ * static_cast<double>(t - 1),
                        0.0, 1.0);
    case Kind::kScripted: {
      const std::int64_t idx = t - 1;
      if (idx < static_cast<std::int64_t>(script_.size())) return script_[idx];
      if (script_cycles_) return script_[idx % script_.size()];
      throw ValidationError("scripted strategy exhausted at step " +
                            std::to_string(t));
    }
    case Kind::kSleeper:
      return base_->next_gamma(t);
  }
  return 0.5;  // unreachable
}

ExpertAdvice ExpertStrategy::next_advice(std::int64_t t) {
  if (kind_ == Kind::kSleeper) {
    bool awake = true;
    switch (sleep_.kind) {
      case SleepPattern::Kind::kAlways: awake = true; break;
      case SleepPattern::Kind::kEven: awake = (t % 2 == 0); break;
      case SleepPattern::Kind::kOdd: awake = (t % 2 == 1); break;
      case SleepPattern::Kind::kEveryK: awake = (t % sleep_.k == 0); break;
      case SleepPattern::Kind::kRandom:
        awake = sleep_rng_.next_bernoulli(sleep_.p_awake);
        break;
    }
    if (!awake) {
      base_->next_gamma(t);  // keep the base stream aligned with steps
      return ExpertAdvice{std::nullopt, eta_, loss_};
    }
    return ExpertAdvice{base_->next_gamma(t), eta_, loss_};
  }
  return ExpertAdvice{next_gamma(t), eta_, loss_};
}

// ---------------------------------------------------------------------------
// RealityStrategy

RealityStrategy RealityStrategy::bernoulli(double p, std::uint64_t seed) {
  if (p < 0.0 || p > 1.0) {
    throw ValidationError("bernoulli reality: p must lie in [0,1]");
  }
  RealityStrategy r;
  r.kind_ = Kind::kBernoulli;
  r.p_ = p;
  r.seed_ = seed;
  r.rng_ = SplitMix64(seed);
  return r;
}

RealityStrategy RealityStrategy::scripted(std::vector<int> outcomes, bool cycle) {
  if (outcomes.empty()) throw ValidationError("scripted reality: empty script");
  for (int w : outcomes) {
    if (!is_valid_outcome(w)) {
      throw ValidationError("scripted reality: outcomes must be 0 or 1");
    }
  }
  RealityStrategy r;
  r.kind_ = Kind::kScripted;
  r.script_ = std::move(outcomes);
  r.script_cycles_ = cycle;
  return r;
}

RealityStrategy RealityStrategy::greedy_adversary(LossSpec target) {
  RealityStrategy r;
  r.kind_ = Kind::kGreedyAdversary;
  r.target_ = std::move(target);
  return r;
}

RealityStrategy RealityStrategy::parse(std::string_view text) {
  if (text.substr(0, 10) == "bernoulli:") {
    std::uint64_t seed = 0;
    std::string_view rest = take_seed(text.substr(10), &seed);
    return bernoulli(parse_real(rest, "probability"), seed);
  }
  if (text.substr(0, 9) == "scripted:") {
    std::string_view rest = text.substr(9);
    bool cycle = false;
    if (rest.size() > 6 && rest.substr(rest.size() - 6) == ":cycle") {
      cycle = true;
      rest = rest.substr(0, rest.size() - 6);
    }
    std::vector<int> outcomes;
    for (auto piece : split(rest, ',')) {
      outcomes.push_back(static_cast<int>(parse_u64(piece, "outcome")));
    }
    return scripted(std::move(outcomes), cycle);
  }
  if (text.substr(0, 10) == "adversary:") {
    return greedy_adversary(LossSpec::parse(text.substr(10)));
  }
  throw ValidationError("unknown reality strategy '" + std::string(text) + "'");
}

std::string RealityStrategy::to_string() const {
  switch (kind_) {
    case Kind::kBernoulli:
      return "bernoulli:" + format_real(p_) + ":seed=" + std::to_string(seed_);
    case Kind::kScripted: {
      std::string out = "scripted:";
      for (size_t i = 0; i < script_.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(script_[i]);
      }
      if (script_cycles_) out += ":cycle";
      return out;
    }
    case Kind::kGreedyAdversary:
      return "adversary:" + target_.id();
  }
  return {};
}

void RealityStrategy::reseed(std::uint64_t salt) {
  rng_ = SplitMix64(seed_ ^ salt);
}

int RealityStrategy::next_outcome(std::int64_t t, double learner_prediction) {
  switch (kind_) {
    case Kind::kBernoulli:
      return rng_.next_bernoulli(p_) ? 1 : 0;
    case Kind::kScripted: {
      const std::int64_t idx = t - 1;
      if (idx < static_cast<std::int64_t>(script_.size())) return script_[idx];
      if (script_cycles_) return script_[idx % script_.size()];
      throw ValidationError("scripted reality exhausted at step " +
                            std::to_string(t));
    }
    case Kind::kGreedyAdversary: {
      const double l1 = target_(learner_prediction, 1);
      const double l0 = target_(learner_prediction, 0);
      return l1 >= l0 ? 1 : 0;  // ties toward 1
    }
  }
  return 0;  // unreachable
}

}  // namespace dfcast::sim
