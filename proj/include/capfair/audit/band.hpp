#pragma once

// Closed-form unfair area of a GLM h(v) = 1[w^T v - b > 0] on a linear SCM
// with one binary sensitive root and continuous remaining features, and the
// label-flip post-processing that removes counterfactual unfairness.
//
// Notation: F is the reduced-form matrix dv/du, [F]_1 its sensitive column,
// F_{-1} the continuous block. Switching the sensitive level from s to s'
// moves the logit by a (s' - s) with a = w^T [F]_1, and a continuous
// semi-latent step delta moves it by (F_{-1}^T w_{-1})^T delta, at most
// Delta * k in the ball of radius Delta with k = ||F_{-1}^T w_{-1}||_{p*}.
// Distances are taken inside a fixed-s slice, normalised by ||w_{-1}||_{p*}.

#include "capfair/audit/unfairness.hpp"

#include <functional>

namespace capfair {

class UnfairBand {
 public:
  UnfairBand(const Classifier& model, const FairMetric& metric, double delta) : metric_(&metric), delta_(delta) {
    const ScmSpec& scm = metric.scm();
    if (!model.is_glm()) throw Error("unfair band: classifier must be a glm");
    if (!scm.is_linear()) throw Error("unfair band: scm must be linear");
    if (scm.sensitive().size() != 1 || metric.categorical().size() != 1) {
      throw Error("unfair band: need exactly one categorical node, the sensitive attribute");
    }
    if (!(delta >= 0.0)) throw Error("unfair band: radius must be >= 0");
    s_ = scm.sensitive().front();
    const auto& levels = scm.node(s_).levels;
    lo_ = levels[0];
    hi_ = levels[1];
    w_ = model.glm_weights();
    b_ = model.glm_bias();
    const Matrix f = scm.jacobian(ExogenousPoint(scm.size()));
    column_ = f.col(s_);
    a_ = w_.dot(column_) * (hi_ - lo_);
    const Vector w_cont = [&] {
      Vector out(metric.continuous_dim());
      for (Index k = 0; k < out.size(); ++k) out[k] = w_[metric.continuous()[static_cast<std::size_t>(k)]];
      return out;
    }();
    const NormP dual = metric.config().dual_p();
    w_norm_ = norm(w_cont, dual);
    k_ = dual_norm(Vector(metric.continuous_jacobian(SemiLatentPoint(scm.size())).transpose() * w_), metric.config().p);
    if (w_norm_ == 0.0) throw Error("unfair band: classifier ignores every continuous feature");
  }

  // Logit shift w^T [F]_1 per unit level difference (levels {lo, hi}).
  [[nodiscard]] double twin_shift() const { return a_; }
  [[nodiscard]] double c1() const { return std::abs(a_) / w_norm_; }
  [[nodiscard]] double c2() const { return delta_ * k_ / w_norm_; }
  [[nodiscard]] double continuous_sensitivity() const { return k_; }
  [[nodiscard]] double radius() const { return delta_; }
  [[nodiscard]] const Vector& sensitive_column() const { return column_; }

  [[nodiscard]] double logit(const Instance& v) const { return w_.dot(v.values()) - b_; }
  [[nodiscard]] int label(const Instance& v) const { return logit(v) > 0.0 ? 1 : 0; }

  // Signed logit change when v's sensitive level is switched to the other one.
  [[nodiscard]] double shift_of(const Instance& v) const { return v[s_] == hi_ ? -a_ : a_; }

  // Signed distance of v to the decision boundary inside its sensitive slice.
  [[nodiscard]] double boundary_distance(const Instance& v) const { return logit(v) / w_norm_; }

  // Counterfactually unfair: the twin lands on the other side of the boundary.
  // Equivalently: the side condition sign(a) (2s - 1) h(v) >= 0 (h in {-1, +1})
  // holds and the distance to the boundary is within c1.
  [[nodiscard]] bool in_cf_area(const Instance& v) const {
    const double z = logit(v);
    const double tau = shift_of(v);
    return z > 0.0 ? z + tau <= 0.0 : z + tau > 0.0;
  }

  // Interval of slice distances t (to the boundary) forming the CF area for
  // v's sensitive level: (lo, hi] with one endpoint at 0.
  [[nodiscard]] std::pair<double, double> cf_interval(const Instance& v) const {
    const double tau = shift_of(v) / w_norm_;
    return {-std::max(0.0, tau), std::max(0.0, -tau)};
  }

  [[nodiscard]] bool side_condition(const Instance& v) const {
    const double s = v[s_] == hi_ ? 1.0 : -1.0;
    const double h = label(v) == 1 ? 1.0 : -1.0;
    const double sa = a_ > 0.0 ? 1.0 : (a_ < 0.0 ? -1.0 : 0.0);
    return sa * s * h >= 0.0 && a_ != 0.0;
  }

  // Within c2 of the CF interval (endpoints included on the buffered side).
  [[nodiscard]] bool in_unfair_area(const Instance& v) const {
    const double t = boundary_distance(v);
    const auto [lo, hi] = cf_interval(v);
    return t > lo - c2() && t <= hi + c2();
  }

  [[nodiscard]] bool in_cf_negative(const Instance& v) const { return in_cf_area(v) && label(v) == 0; }
  [[nodiscard]] bool in_cf_positive(const Instance& v) const { return in_cf_area(v) && label(v) == 1; }

 private:
  const FairMetric* metric_;
  double delta_;
  int s_ = 0;
  double lo_ = 0.0;
  double hi_ = 1.0;
  Vector w_;
  double b_ = 0.0;
  Vector column_;
  double a_ = 0.0;
  double w_norm_ = 0.0;
  double k_ = 0.0;
};

// Direction in which the flip set is relabelled.
enum class FlipDirection { ToPositive, ToNegative };

using FlipSelector = std::function<bool(const Instance&)>;

// h'(v) = flipped label on C, h(v) elsewhere. C is the selector's choice
// intersected with the counterfactually unfair points carrying the label
// being flipped away from. Membership in that region is decided exactly by
// enumerating twins, so the wrapper works for any classifier.
class MitigatedClassifier {
 public:
  MitigatedClassifier(Classifier base, const ScmSpec& scm, FlipSelector selector, FlipDirection dir,
                      const std::vector<Instance>& probe = {})
      : base_(std::move(base)), scm_(&scm), selector_(std::move(selector)), dir_(dir) {
    for (const auto& v : probe) {
      if (selector_ && selector_(v) && !in_region(v)) {
        throw Error("flip selector chose a point outside the counterfactually unfair region");
      }
    }
  }

  [[nodiscard]] const Classifier& base() const { return base_; }
  [[nodiscard]] FlipDirection direction() const { return dir_; }

  // Counterfactually unfair with the label that gets flipped.
  [[nodiscard]] bool in_region(const Instance& v) const {
    const int own = base_.predict(v);
    if (own != (dir_ == FlipDirection::ToPositive ? 0 : 1)) return false;
    for (const auto& t : scm_->twins(v)) {
      if (base_.predict(t) != own) return true;
    }
    return false;
  }

  [[nodiscard]] bool in_flip_set(const Instance& v) const { return selector_ && selector_(v) && in_region(v); }

  [[nodiscard]] int predict(const Instance& v) const {
    if (in_flip_set(v)) return dir_ == FlipDirection::ToPositive ? 1 : 0;
    return base_.predict(v);
  }

  [[nodiscard]] std::vector<int> predict(const Matrix& x) const {
    std::vector<int> out(static_cast<std::size_t>(x.cols()));
    for (Index i = 0; i < x.cols(); ++i) out[static_cast<std::size_t>(i)] = predict(Instance(Vector(x.col(i))));
    return out;
  }

 private:
  Classifier base_;
  const ScmSpec* scm_;
  FlipSelector selector_;
  FlipDirection dir_;
};

inline MitigatedClassifier counterfactual_mitigate(const Classifier& model, const ScmSpec& scm, FlipSelector selector,
                                                   FlipDirection dir = FlipDirection::ToPositive,
                                                   const std::vector<Instance>& probe = {}) {
  return MitigatedClassifier(model, scm, std::move(selector), dir, probe);
}

// Selector for the whole region (C equal to the negative, or positive, CF area).
inline FlipSelector select_all() {
  return [](const Instance&) { return true; };
}

struct MitigationAccounting {
  double cf_before = 0.0;      // P(A_C)
  double flip_mass = 0.0;      // P(C)
  double twin_mass = 0.0;      // P(C_+): points whose twin lies in C
  double predicted = 0.0;      // P(A_C) - P(C) - P(C_+)
  double cf_after = 0.0;       // measured on an independent sample
  double standard_error = 0.0; // of predicted - cf_after
  double accuracy_before = 0.0;
  double accuracy_after = 0.0;
};

// Estimates the accounting terms on `estimate` and the post-mitigation CF
// rate on the independent `measure` sample.
inline MitigationAccounting mitigation_accounting(const MitigatedClassifier& mitigated, const ScmSpec& scm,
                                                  const Dataset& estimate, const Dataset& measure) {
  MitigationAccounting acc;
  const Classifier& base = mitigated.base();
  const auto cf = cf_flags(base, scm, estimate.x);
  double n1 = static_cast<double>(estimate.size());
  long in_c = 0;
  long in_twin = 0;
  for (Index i = 0; i < estimate.size(); ++i) {
    const Instance v = estimate.instance(i);
    if (mitigated.in_flip_set(v)) ++in_c;
    for (const auto& t : scm.twins(v)) {
      if (!(t == v) && mitigated.in_flip_set(t)) {
        ++in_twin;
        break;
      }
    }
  }
  acc.cf_before = flag_rate(cf);
  acc.flip_mass = static_cast<double>(in_c) / n1;
  acc.twin_mass = static_cast<double>(in_twin) / n1;
  acc.predicted = acc.cf_before - acc.flip_mass - acc.twin_mass;
  acc.cf_after = cf_rate(mitigated, scm, measure);
  const double n2 = static_cast<double>(measure.size());
  const double var1 = std::max(acc.predicted * (1.0 - acc.predicted), 0.0) / n1;
  const double var2 = acc.cf_after * (1.0 - acc.cf_after) / n2;
  acc.standard_error = std::sqrt(var1 + var2);
  acc.accuracy_before = accuracy(base, measure);
  acc.accuracy_after = accuracy(mitigated, measure);
  return acc;
}

}  // namespace capfair
