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

#include "dfcast/loss.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <vector>

namespace dfcast {
namespace {

double neg_log(double p) { return p <= 0.0 ? kInf : -std::log(p); }

// Shortest decimal form that parses back to the same double.
std::string format_double(double x) {
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

double parse_positive_real(std::string_view text, const char* what) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !(value > 0.0) ||
      !std::isfinite(value)) {
    throw ValidationError(std::string("loss spec: expected positive real for ") +
                          what + ", got '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

LossSpec::LossSpec(LossKind kind, double param,
                   std::shared_ptr<const LossSpec> base, double eta_max,
                   std::string id)
    : kind_(kind), param_(param), base_(std::move(base)), eta_max_(eta_max),
      id_(std::move(id)) {}

LossSpec LossSpec::log_loss() {
  return LossSpec(LossKind::kLog, 0.0, nullptr, 1.0, "log");
}

LossSpec LossSpec::square() {
  return LossSpec(LossKind::kSquare, 0.0, nullptr, 2.0, "square");
}

LossSpec LossSpec::generalized_log(double eta0) {
  if (!(eta0 > 0.0) || !std::isfinite(eta0)) {
    throw ValidationError("generalized log loss needs eta0 > 0");
  }
  return LossSpec(LossKind::kGeneralizedLog, eta0, nullptr, eta0,
                  "genlog:" + format_double(eta0));
}

LossSpec LossSpec::zero() {
  return LossSpec(LossKind::kZero, 0.0, nullptr, 1.0, "zero");
}

LossSpec LossSpec::scaled(LossSpec base, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw ValidationError("scaled loss needs c > 0");
  }
  const double eta = base.eta_max() / c;
  std::string id = "scaled:" + format_double(c) + ":" + base.id();
  return LossSpec(LossKind::kScaled, c,
                  std::make_shared<const LossSpec>(std::move(base)), eta,
                  std::move(id));
}

LossSpec LossSpec::parse(std::string_view text) {
  if (text == "log") return log_loss();
  if (text == "square") return square();
  if (text == "zero") return zero();
  constexpr std::string_view kGenlog = "genlog:";
  constexpr std::string_view kScaled = "scaled:";
  if (text.substr(0, kGenlog.size()) == kGenlog) {
    return generalized_log(parse_positive_real(text.substr(kGenlog.size()), "eta"));
  }
  if (text.substr(0, kScaled.size()) == kScaled) {
    std::string_view rest = text.substr(kScaled.size());
    const size_t colon = rest.find(':');
    if (colon == std::string_view::npos) {
      throw ValidationError("scaled loss spec needs 'scaled:<c>:<base>'");
    }
    const double c = parse_positive_real(rest.substr(0, colon), "scale");
    return scaled(parse(rest.substr(colon + 1)), c);
  }
  throw ValidationError("unknown loss spec '" + std::string(text) + "'");
}

double LossSpec::evaluate(double gamma, int omega) const {
  switch (kind_) {
    case LossKind::kLog:
      return omega == 1 ? neg_log(gamma) : neg_log(1.0 - gamma);
    case LossKind::kSquare: {
      const double d = static_cast<double>(omega) - gamma;
      return d * d;
    }
    case LossKind::kGeneralizedLog:
      return (omega == 1 ? neg_log(gamma) : neg_log(1.0 - gamma)) / param_;
    case LossKind::kZero:
      return 0.0;
    case LossKind::kScaled:
      return param_ * base_->evaluate(gamma, omega);
  }
  return kNaN;  // unreachable
}

bool LossSpec::mixable_at_any_eta() const {
  if (kind_ == LossKind::kZero) return true;
  if (kind_ == LossKind::kScaled) return base_->mixable_at_any_eta();
  return false;
}

double mixability_constant(const LossSpec& loss) { return loss.eta_max(); }

// ---------------------------------------------------------------------------
// Mixability certificate.
//
// The image point of gamma is (e^{-eta l0}, e^{-eta l1}) in [0,1]^2; the image
// of the whole superprediction set is everything below-left of the sampled
// curve.  Convexity of that region is equivalent to every chord midpoint of
// curve points being dominated by the region, which we approximate from below
// by the piecewise-linear Pareto frontier of the samples.

namespace {

struct ImageFrontier {
  std::vector<double> raw_u, raw_v;   // by gamma index
  std::vector<double> fu, fv;         // frontier, fu strictly ascending
};

ImageFrontier sample_image(const LossFn& loss, double eta, int grid_n) {
  ImageFrontier img;
  img.raw_u.reserve(grid_n);
  img.raw_v.reserve(grid_n);
  for (int i = 0; i < grid_n; ++i) {
    const double g = static_cast<double>(i) / (grid_n - 1);
    img.raw_u.push_back(std::exp(-eta * loss(g, 0)));
    img.raw_v.push_back(std::exp(-eta * loss(g, 1)));
  }
  std::vector<int> order(grid_n);
  for (int i = 0; i < grid_n; ++i) order[i] = i;
  // Ties in u sort by v so the descending sweep sees the best v first.
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return img.raw_u[a] != img.raw_u[b] ? img.raw_u[a] < img.raw_u[b]
                                        : img.raw_v[a] < img.raw_v[b];
  });
  // Sweep from the largest u down, keeping points that raise the best v.
  double best_v = -1.0;
  std::vector<double> fu, fv;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const double u = img.raw_u[*it];
    const double v = img.raw_v[*it];
    if (v > best_v) {
      if (!fu.empty() && fu.back() == u) continue;  // equal u, smaller v
      fu.push_back(u);
      fv.push_back(v);
      best_v = v;
    }
  }
  std::reverse(fu.begin(), fu.end());
  std::reverse(fv.begin(), fv.end());
  img.fu = std::move(fu);
  img.fv = std::move(fv);
  return img;
}

// Signed slack of (qu, qv) against the frontier polyline: >= 0 means some
// frontier point sits weakly Northeast of the query.
double frontier_slack(const ImageFrontier& img, double qu, double qv) {
  const auto& fu = img.fu;
  const auto& fv = img.fv;
  const double umax = fu.back();
  if (qu > umax) return std::min(umax - qu, fv.back() - qv);
  double v_at = fv.front();
  if (qu > fu.front()) {
    const auto it = std::lower_bound(fu.begin(), fu.end(), qu);
    const size_t i = static_cast<size_t>(it - fu.begin());
    if (*it == qu) {
      v_at = fv[i];
    } else {
      const double t = (qu - fu[i - 1]) / (fu[i] - fu[i - 1]);
      v_at = fv[i - 1] + t * (fv[i] - fv[i - 1]);
    }
  }
  return v_at - qv;
}

}  // namespace

bool check_eta_mixable(const LossFn& loss, double eta, int grid_n) {
  if (!(eta > 0.0)) throw ValidationError("check_eta_mixable needs eta > 0");
  if (grid_n < 3) throw ValidationError("check_eta_mixable needs grid_n >= 3");
  constexpr double kTol = 1e-9;
  const ImageFrontier img = sample_image(loss, eta, grid_n);
  for (int i = 0; i < grid_n; ++i) {
    for (int j = i + 1; j < grid_n; ++j) {
      const double qu = 0.5 * (img.raw_u[i] + img.raw_u[j]);
      const double qv = 0.5 * (img.raw_v[i] + img.raw_v[j]);
      if (frontier_slack(img, qu, qv) < -kTol) return false;
    }
  }
  return true;
}

bool check_eta_mixable(const LossSpec& loss, double eta, int grid_n) {
  return check_eta_mixable(as_fn(loss), eta, grid_n);
}

bool check_proper(const LossFn& loss, int grid_n) {
  if (grid_n < 3) throw ValidationError("check_proper needs grid_n >= 3");
  constexpr double kTol = 1e-12;
  std::vector<double> l0(grid_n), l1(grid_n);
  for (int i = 0; i < grid_n; ++i) {
    const double g = static_cast<double>(i) / (grid_n - 1);
    l0[i] = loss(g, 0);
    l1[i] = loss(g, 1);
  }
  for (int b = 0; b < grid_n; ++b) {
    const double pi = static_cast<double>(b) / (grid_n - 1);
    const double truthful =
        prod_zero_inf(pi, l1[b]) + prod_zero_inf(1.0 - pi, l0[b]);
    for (int j = 0; j < grid_n; ++j) {
      const double other =
          prod_zero_inf(pi, l1[j]) + prod_zero_inf(1.0 - pi, l0[j]);
      if (!(truthful <= other + kTol)) return false;
    }
  }
  return true;
}

bool check_proper(const LossSpec& loss, int grid_n) {
  return check_proper(as_fn(loss), grid_n);
}

bool superprediction_contains(const LossFn& loss, SuperpredictionQuery q,
                              int grid_n) {
  if (grid_n < 3) throw ValidationError("superprediction_contains needs grid_n >= 3");
  if (q.x < 0.0 || q.y < 0.0) {
    throw ValidationError("superprediction query needs x >= 0 and y >= 0");
  }
  constexpr double kTol = 1e-9;
  const auto margin = [&](double g) {
    return std::min(loss_diff(q.x, loss(g, 0)), loss_diff(q.y, loss(g, 1)));
  };
  double best_g = 0.0;
  double best = -kInf;
  for (int i = 0; i < grid_n; ++i) {
    const double g = static_cast<double>(i) / (grid_n - 1);
    const double m = margin(g);
    if (m > best) {
      best = m;
      best_g = g;
    }
  }
  // Refine around the best grid point until the step is below tolerance.
  double half = 1.0 / (grid_n - 1);
  while (half > 1e-12) {
    const double lo = std::max(0.0, best_g - half);
    const double hi = std::min(1.0, best_g + half);
    constexpr int kPts = 33;
    for (int i = 0; i < kPts; ++i) {
      const double g = lo + (hi - lo) * i / (kPts - 1);
      const double m = margin(g);
      if (m > best) {
        best = m;
        best_g = g;
      }
    }
    half /= 8.0;
  }
  return best >= -kTol;
}

bool superprediction_contains(const LossSpec& loss, SuperpredictionQuery q,
                              int grid_n) {
  return superprediction_contains(as_fn(loss), q, grid_n);
}

std::pair<double, double> shift_pi_point(double eta, double pi) {
  if (!(eta > 0.0)) throw ValidationError("shift_pi_point needs eta > 0");
  if (!(pi > 0.0) || !(pi < 1.0)) {
    throw ValidationError("shift_pi_point needs pi strictly inside (0,1)");
  }
  return {-std::log1p(-pi) / eta, -std::log(pi) / eta};
}

bool check_shift_domination(const LossFn& loss, double eta, int grid_n) {
  if (!(eta > 0.0)) throw ValidationError("check_shift_domination needs eta > 0");
  if (grid_n < 3) throw ValidationError("check_shift_domination needs grid_n >= 3");
  constexpr double kTol = 1e-9;
  std::vector<double> l0(grid_n), l1(grid_n);
  for (int i = 0; i < grid_n; ++i) {
    const double g = static_cast<double>(i) / (grid_n - 1);
    l0[i] = loss(g, 0);
    l1[i] = loss(g, 1);
  }
  for (int b = 1; b + 1 < grid_n; ++b) {
    const double pi = static_cast<double>(b) / (grid_n - 1);
    const double a0 = l0[b];
    const double a1 = l1[b];
    if (std::isinf(a0) || std::isinf(a1)) continue;  // no anchor point here
    for (int j = 0; j < grid_n; ++j) {
      const double t0 = (1.0 - pi) * std::exp(-eta * loss_diff(l0[j], a0));
      const double t1 = pi * std::exp(-eta * loss_diff(l1[j], a1));
      if (!(t0 + t1 <= 1.0 + kTol)) return false;
    }
  }
  return true;
}

bool check_shift_domination(const LossSpec& loss, double eta, int grid_n) {
  return check_shift_domination(as_fn(loss), eta, grid_n);
}

// ---------------------------------------------------------------------------
// Substitution function.

namespace {

void validate_weights(std::span<const double> weights,
                      std::span<const double> preds) {
  if (weights.size() != preds.size()) {
    throw ValidationError("substitution: weights and predictions differ in length");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ValidationError("substitution: weights must be finite and nonnegative");
    }
    sum += w;
  }
  if (!weights.empty() && std::abs(sum - 1.0) > 1e-12) {
    throw ValidationError("substitution: weights must sum to 1");
  }
  for (double g : preds) {
    if (!is_valid_prediction(g)) {
      throw ValidationError("substitution: predictions must lie in [0,1]");
    }
  }
}

// The weighted log-mix point g(omega); +inf when the whole mixture vanishes.
std::pair<double, double> mix_point(const LossSpec& loss, double eta,
                                    std::span<const double> weights,
                                    std::span<const double> preds) {
  double s0 = 0.0, s1 = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    s0 += weights[i] * std::exp(-eta * loss(preds[i], 0));
    s1 += weights[i] * std::exp(-eta * loss(preds[i], 1));
  }
  const double g0 = s0 <= 0.0 ? kInf : -std::log(s0) / eta;
  const double g1 = s1 <= 0.0 ? kInf : -std::log(s1) / eta;
  return {g0, g1};
}

// Slack of gamma against the mix point in the exponentiated image domain,
// minimized over the two outcomes.
double image_slack(const LossSpec& loss, double eta, double g0, double g1,
                   double gamma) {
  const double s0 = std::exp(-eta * loss(gamma, 0)) - std::exp(-eta * g0);
  const double s1 = std::exp(-eta * loss(gamma, 1)) - std::exp(-eta * g1);
  return std::min(s0, s1);
}

}  // namespace

Prediction substitution(const LossSpec& loss, double eta,
                        std::span<const double> weights,
                        std::span<const double> preds) {
  if (!(eta > 0.0)) throw ValidationError("substitution needs eta > 0");
  if (!loss.mixable_at_any_eta() && eta > loss.eta_max() * (1.0 + 1e-12)) {
    throw MixabilityError("substitution: eta " + std::to_string(eta) +
                          " exceeds mixability constant of " + loss.id());
  }
  validate_weights(weights, preds);
  if (weights.empty()) return 0.5;

  const auto [g0, g1] = mix_point(loss, eta, weights, preds);

  const auto balance = [&](double g) {
    return loss_diff(loss(g, 0), g0) - loss_diff(loss(g, 1), g1);
  };

  double candidate = kNaN;
  const double d_lo = balance(0.0);
  const double d_hi = balance(1.0);
  if (!std::isnan(d_lo) && !std::isnan(d_hi) && d_lo <= 0.0 && d_hi >= 0.0) {
    double lo = 0.0, hi = 1.0;
    if (d_lo == 0.0) {
      hi = lo;
    } else if (d_hi == 0.0) {
      lo = hi;
    }
    for (int iter = 0; iter < 200 && hi - lo > 1e-12; ++iter) {
      const double mid = 0.5 * (lo + hi);
      const double dm = balance(mid);
      if (std::isnan(dm)) break;
      if (dm == 0.0) {
        lo = hi = mid;
        break;
      }
      (dm < 0.0 ? lo : hi) = mid;
    }
    candidate = 0.5 * (lo + hi);
  }

  constexpr double kTol = 1e-9;
  if (!std::isnan(candidate) &&
      image_slack(loss, eta, g0, g1, candidate) >= -kTol) {
    return candidate;
  }

  // No usable sign change (corner of a non-strictly-proper loss): scan for
  // any gamma with both slacks within tolerance.
  constexpr int kScan = 4001;
  double best_g = 0.5, best = -kInf;
  for (int i = 0; i < kScan; ++i) {
    const double g = static_cast<double>(i) / (kScan - 1);
    const double s = image_slack(loss, eta, g0, g1, g);
    if (s > best) {
      best = s;
      best_g = g;
    }
  }
  if (best >= -kTol) return best_g;
  throw InvariantViolation(
      "substitution: no prediction satisfies the mix-dominance contract for " +
      loss.id() + " at eta " + std::to_string(eta));
}

bool substitution_holds(const LossSpec& loss, double eta,
                        std::span<const double> weights,
                        std::span<const double> preds, double pi, double tol) {
  validate_weights(weights, preds);
  for (int omega : {0, 1}) {
    const double lp = loss(pi, omega);
    double sum = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] == 0.0) continue;
      sum += weights[i] * std::exp(eta * loss_diff(lp, loss(preds[i], omega)));
    }
    if (!(sum <= 1.0 + tol)) return false;
  }
  return true;
}

bool check_loss_assumptions(const LossFn& loss, int grid_n) {
  if (grid_n < 3) throw ValidationError("check_loss_assumptions needs grid_n >= 3");
  const int fine_n = 2 * grid_n - 1;
  bool some_finite_pair = false;
  std::vector<double> c0(grid_n), c1(grid_n);
  for (int i = 0; i < grid_n; ++i) {
    const double g = static_cast<double>(i) / (grid_n - 1);
    c0[i] = loss(g, 0);
    c1[i] = loss(g, 1);
    if (std::isinf(c0[i]) && std::isinf(c1[i])) return false;  // doubly infinite
    if (std::isfinite(c0[i]) && std::isfinite(c1[i])) some_finite_pair = true;
  }
  if (!some_finite_pair) return false;

  // Modulus-of-continuity certificate away from infinite endpoints: on the
  // region where the loss stays below a cap, the largest adjacent-sample jump
  // must shrink when the grid is refined; a genuine jump discontinuity stays.
  constexpr double kCap = 5.0;
  const auto max_step = [&](int n, int omega) {
    double worst = 0.0;
    double prev = loss(0.0, omega);
    for (int i = 1; i < n; ++i) {
      const double cur = loss(static_cast<double>(i) / (n - 1), omega);
      if (prev <= kCap && cur <= kCap) {
        worst = std::max(worst, std::abs(cur - prev));
      }
      prev = cur;
    }
    return worst;
  };
  for (int omega : {0, 1}) {
    const double coarse = max_step(grid_n, omega);
    const double fine = max_step(fine_n, omega);
    if (!(fine <= 0.75 * coarse + 1e-9)) return false;
  }
  return true;
}

bool check_loss_assumptions(const LossSpec& loss, int grid_n) {
  return check_loss_assumptions(as_fn(loss), grid_n);
}

}  // namespace dfcast
