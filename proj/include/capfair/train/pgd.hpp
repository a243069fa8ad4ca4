#pragma once

// Batched projected gradient search over continuous perturbations.
//
// A PerturbationSpace maps an anchor point and a perturbation delta (one
// entry per continuous feature) to a classifier input and pulls input
// gradients back to delta. Two spaces exist: the raw feature space (x = v +
// delta on the continuous coordinates) and the semi-latent space of a fair
// metric (x = T^{-1}(q + delta), with q = T(v) as the anchor).

#include "capfair/core/norms.hpp"
#include "capfair/metric/fair_metric.hpp"
#include "capfair/model/classifier.hpp"

#include <functional>
#include <limits>
#include <vector>

namespace capfair {

class PerturbationSpace {
 public:
  static PerturbationSpace raw(std::vector<int> continuous) {
    PerturbationSpace s;
    s.continuous_ = std::move(continuous);
    return s;
  }
  static PerturbationSpace semi_latent(const FairMetric& metric) {
    PerturbationSpace s;
    s.continuous_ = metric.continuous();
    s.metric_ = &metric;
    return s;
  }

  [[nodiscard]] bool is_semi_latent() const { return metric_ != nullptr; }
  [[nodiscard]] Index dim() const { return static_cast<Index>(continuous_.size()); }
  [[nodiscard]] const std::vector<int>& continuous() const { return continuous_; }

  // Anchor of an instance: v itself in raw space, T(v) in semi-latent space.
  [[nodiscard]] Vector anchor(const Instance& v) const {
    return metric_ ? metric_->to_semi_latent(v).values() : v.values();
  }

  [[nodiscard]] Vector shifted(const Vector& anchor, const Vector& delta) const {
    Vector a = anchor;
    for (Index k = 0; k < delta.size(); ++k) a[continuous_[static_cast<std::size_t>(k)]] += delta[k];
    return a;
  }

  [[nodiscard]] Vector map(const Vector& anchor, const Vector& delta) const {
    Vector a = shifted(anchor, delta);
    if (!metric_) return a;
    return metric_->from_semi_latent(SemiLatentPoint(std::move(a))).values();
  }

  [[nodiscard]] Matrix map(const Matrix& anchors, const Matrix& deltas) const {
    Matrix out(anchors.rows(), anchors.cols());
    for (Index i = 0; i < anchors.cols(); ++i) out.col(i) = map(Vector(anchors.col(i)), Vector(deltas.col(i)));
    return out;
  }

  // Column i: d x / d delta at (anchor_i, delta_i), transposed, applied to grad_x column i.
  [[nodiscard]] Matrix pullback(const Matrix& anchors, const Matrix& deltas, const Matrix& grad_x) const {
    Matrix out(dim(), anchors.cols());
    for (Index i = 0; i < anchors.cols(); ++i) {
      if (!metric_) {
        for (Index k = 0; k < dim(); ++k) out(k, i) = grad_x(continuous_[static_cast<std::size_t>(k)], i);
        continue;
      }
      const Matrix jac = metric_->continuous_jacobian(SemiLatentPoint(shifted(anchors.col(i), deltas.col(i))));
      out.col(i) = jac.transpose() * grad_x.col(i);
    }
    return out;
  }

 private:
  std::vector<int> continuous_;
  const FairMetric* metric_ = nullptr;
};

struct Evaluation {
  Vector value;  // per column
  Matrix grad;   // dim x m, gradient w.r.t. delta (empty unless requested)
};

// Per-column loss (or logit) at map(anchor, delta) and its delta-gradient.
inline Evaluation evaluate(const Classifier& model, const PerturbationSpace& space, const Matrix& anchors,
                           const Vector& y, const Matrix& deltas, Target target, bool with_grad) {
  const Matrix x = space.map(anchors, deltas);
  Evaluation ev;
  Matrix gx;
  model.backward(x, y, Vector::Ones(x.cols()), target, nullptr, with_grad ? &gx : nullptr, &ev.value);
  if (with_grad) ev.grad = space.pullback(anchors, deltas, gx);
  return ev;
}

struct PgdOptions {
  int steps = 10;
  double step_size = 0.0;  // <= 0 selects radius / 4
  int restarts = 1;        // random restarts in addition to the start at delta = 0
  NormP p = NormP::L2;
};

// Batched objective: values (m) and gradients (dim x m) at deltas.
using BatchObjective = std::function<Evaluation(const Matrix& deltas, bool with_grad)>;

struct PgdResult {
  Matrix delta;  // dim x m, best iterate found
  Vector value;  // objective at delta
};

// Maximizes the objective independently per column over
// ||delta_i||_p <= radii_i. The first run starts at `start` (zero if empty),
// further runs at uniform points of the ball. The best iterate over all runs
// and steps is returned.
inline PgdResult pgd_maximize(const BatchObjective& objective, Index dim, const Vector& radii,
                              const PgdOptions& opt, Rng& rng, const Matrix& start = Matrix()) {
  const Index m = radii.size();
  PgdResult best{Matrix::Zero(dim, m), Vector::Constant(m, -std::numeric_limits<double>::infinity())};
  if (dim == 0 || m == 0 || radii.maxCoeff() <= 0.0) {
    best.value = objective(best.delta, false).value;
    return best;
  }
  auto keep = [&best](const Matrix& delta, const Vector& value) {
    for (Index i = 0; i < value.size(); ++i) {
      if (value[i] > best.value[i]) {
        best.value[i] = value[i];
        best.delta.col(i) = delta.col(i);
      }
    }
  };
  for (int run = 0; run <= opt.restarts; ++run) {
    Matrix delta(dim, m);
    if (run == 0) {
      delta = start.size() ? start : Matrix::Zero(dim, m);
    } else {
      for (Index i = 0; i < m; ++i) delta.col(i) = sample_ball(dim, radii[i], opt.p, rng);
    }
    for (int step = 0; step < opt.steps; ++step) {
      const Evaluation ev = objective(delta, true);
      keep(delta, ev.value);
      for (Index i = 0; i < m; ++i) {
        if (radii[i] <= 0.0) continue;
        const double alpha = opt.step_size > 0.0 ? opt.step_size : radii[i] / 4.0;
        const Vector moved = delta.col(i) + alpha * dual_direction(ev.grad.col(i), opt.p);
        delta.col(i) = project_ball(moved, radii[i], opt.p);
      }
    }
    keep(delta, objective(delta, false).value);
  }
  return best;
}

// Loss (or logit) objective in a perturbation space, multiplied per column
// by `signs` so a column can be minimized instead of maximized.
inline BatchObjective loss_objective(const Classifier& model, const PerturbationSpace& space, const Matrix& anchors,
                                     const Vector& y, const Vector& signs, Target target = Target::Loss) {
  return [&model, &space, &anchors, &y, &signs, target](const Matrix& deltas, bool with_grad) {
    Evaluation ev = evaluate(model, space, anchors, y, deltas, target, with_grad);
    ev.value.array() *= signs.array();
    if (with_grad) ev.grad.array().rowwise() *= signs.transpose().array();
    return ev;
  };
}

}  // namespace capfair
