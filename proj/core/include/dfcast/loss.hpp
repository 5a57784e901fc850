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

#ifndef DFCAST_LOSS_HPP_
#define DFCAST_LOSS_HPP_

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dfcast/common.hpp"

namespace dfcast {

// Binary-outcome loss functions lambda(gamma, omega) on [0,1] x {0,1} with
// values in [0, +inf].  Every catalogue entry satisfies:
//   - lambda(., 0) and lambda(., 1) are continuous into [0, +inf];
//   - some gamma has both values finite;
//   - no gamma has both values infinite.
//
// A loss is eta-mixable when the image of its superprediction set under
// (x, y) -> (e^{-eta x}, e^{-eta y}) is convex, and proper when predicting
// one's belief minimizes expected loss.  Both properties are certified
// numerically on a grid here, not proved symbolically.
enum class LossKind { kLog, kSquare, kGeneralizedLog, kZero, kScaled };

class LossSpec {
 public:
  static LossSpec log_loss();
  static LossSpec square();
  // (1/eta0) times the log loss; eta0-mixable.
  static LossSpec generalized_log(double eta0);
  // Identically zero; encodes a sleeping expert's step.
  static LossSpec zero();
  // c * base for c > 0; mixability constant scales as base/c.
  static LossSpec scaled(LossSpec base, double c);

  // Text forms: "log", "square", "genlog:<eta>", "zero", "scaled:<c>:<base>".
  static LossSpec parse(std::string_view text);

  double operator()(double gamma, int omega) const { return evaluate(gamma, omega); }
  double evaluate(double gamma, int omega) const;

  LossKind kind() const { return kind_; }
  const std::string& id() const { return id_; }
  // Largest eta for which the loss is claimed eta-mixable. The zero loss is
  // eta-mixable for every eta; its canonical constant is 1.
  double eta_max() const { return eta_max_; }
  // True for the zero loss, whose mixability claim holds at every eta > 0.
  bool mixable_at_any_eta() const;

  bool operator==(const LossSpec& other) const { return id_ == other.id_; }

 private:
  LossSpec(LossKind kind, double param, std::shared_ptr<const LossSpec> base,
           double eta_max, std::string id);

  LossKind kind_;
  double param_ = 0.0;  // eta0 for generalized log, c for scaled
  std::shared_ptr<const LossSpec> base_;
  double eta_max_;
  std::string id_;
};

// evaluate as a free function, mirroring the other loss operations.
inline double evaluate(const LossSpec& loss, double gamma, int omega) {
  return loss.evaluate(gamma, omega);
}

// Canonical mixability constant of a catalogue loss (zero loss reports 1).
double mixability_constant(const LossSpec& loss);

// A loss given as a plain callable, for certifying candidates that are not in
// the catalogue.
using LossFn = std::function<double(double gamma, int omega)>;

inline LossFn as_fn(const LossSpec& loss) {
  return [loss](double g, int w) { return loss.evaluate(g, w); };
}

// Numeric certificate that the image of the superprediction set under
// (x,y) -> (e^{-eta x}, e^{-eta y}) is convex.  Samples the image curve on a
// grid_n-point gamma grid and requires every chord midpoint to be dominated
// (componentwise, within 1e-9) by the piecewise-linear Pareto frontier of the
// sampled curve, which stands in for the image region lying below-left of it.
bool check_eta_mixable(const LossFn& loss, double eta, int grid_n = 1001);
bool check_eta_mixable(const LossSpec& loss, double eta, int grid_n = 1001);

// Numeric certificate that the loss is a proper scoring rule: on a grid of
// beliefs pi and candidate predictions pi', truthful prediction minimizes
// expected loss up to 1e-12.  Products 0 * inf count as 0.
bool check_proper(const LossFn& loss, int grid_n = 1001);
bool check_proper(const LossSpec& loss, int grid_n = 1001);

struct SuperpredictionQuery {
  double x = 0.0;
  double y = 0.0;
};

// Whether (x, y) is dominated by some prediction's loss pair, i.e. some gamma
// has lambda(gamma,0) <= x and lambda(gamma,1) <= y.  Grid search with local
// refinement near the boundary; boundary points count as contained (1e-9).
bool superprediction_contains(const LossFn& loss, SuperpredictionQuery q,
                              int grid_n = 1001);
bool superprediction_contains(const LossSpec& loss, SuperpredictionQuery q,
                              int grid_n = 1001);

// The point of the translated curve e^{-eta x} + e^{-eta y} = 1 indexed by
// pi in (0,1): (-ln(1-pi)/eta, -ln(pi)/eta).  Throws for pi in {0,1}.
std::pair<double, double> shift_pi_point(double eta, double pi);

// Geometric form of properness for an eta-mixable loss: every loss pair
// (lambda(gamma,0), lambda(gamma,1)) lies Northeast of the translate of
// e^{-eta x} + e^{-eta y} = 1 anchored at the pi-indexed point of the loss
// curve, for every grid pi in (0,1).  Slack tolerance 1e-9.
bool check_shift_domination(const LossFn& loss, double eta, int grid_n = 1001);
bool check_shift_domination(const LossSpec& loss, double eta, int grid_n = 1001);

// The merged prediction of the weighted set {(weights[i], preds[i])}: some
// gamma whose loss pair is dominated by the weighted log-mix point
//   g(omega) = -(1/eta) ln sum_i weights[i] e^{-eta lambda(preds[i], omega)},
// so that for both outcomes e^{-eta lambda(gamma,omega)} >= sum_i weights[i]
// e^{-eta lambda(preds[i],omega)} - 1e-9.  Found by bisecting the
// slack-balance function d(gamma) = (lambda(gamma,0)-g(0)) -
// (lambda(gamma,1)-g(1)) to |interval| <= 1e-12 (cap 200 iterations); if no
// sign change exists (corner of a non-strictly-proper loss) falls back to a
// grid scan for any gamma with both slacks within tolerance.  Other gammas may
// satisfy the same inequality; the slack-balance root is the canonical pick.
// k = 0 returns 0.5.
//
// Throws MixabilityError when eta exceeds the loss's mixability constant and
// ValidationError for malformed weights.
Prediction substitution(const LossSpec& loss, double eta,
                        std::span<const double> weights,
                        std::span<const double> preds);

// Whether pi satisfies the substitution guarantee against the weighted set:
// sum_i weights[i] e^{eta (lambda(pi,omega) - lambda(preds[i],omega))} <= 1 + tol
// for both outcomes.  Used as a per-step transcript check.
bool substitution_holds(const LossSpec& loss, double eta,
                        std::span<const double> weights,
                        std::span<const double> preds, double pi,
                        double tol = 1e-9);

// Grid check of the three standing assumptions (continuity away from infinite
// endpoints, some finite pair, no doubly-infinite pair).
bool check_loss_assumptions(const LossFn& loss, int grid_n = 1001);
bool check_loss_assumptions(const LossSpec& loss, int grid_n = 1001);

}  // namespace dfcast

#endif  // DFCAST_LOSS_HPP_
