#pragma once

// Inner problems of the training objectives. Each batched routine appends
// weighted rows (input, label, coefficient) whose summed loss has the
// parameter gradient of the corresponding objective term, with perturbation
// points frozen at the values found by the search.

#include "capfair/train/pgd.hpp"

#include <vector>

namespace capfair {

struct ObjectiveRows {
  std::vector<Vector> x;
  std::vector<double> y;
  std::vector<double> coef;

  void add(const Vector& xi, double yi, double c) {
    if (c == 0.0) return;
    x.push_back(xi);
    y.push_back(yi);
    coef.push_back(c);
  }

  [[nodiscard]] Index size() const { return static_cast<Index>(x.size()); }

  [[nodiscard]] Matrix inputs() const {
    Matrix out(x.empty() ? 0 : x.front().size(), size());
    for (Index i = 0; i < size(); ++i) out.col(i) = x[static_cast<std::size_t>(i)];
    return out;
  }
  [[nodiscard]] Vector labels() const { return Eigen::Map<const Vector>(y.data(), size()); }
  [[nodiscard]] Vector coefficients() const { return Eigen::Map<const Vector>(coef.data(), size()); }
};

struct SearchResult {
  Matrix points;  // n x m, best point per input column
  Vector value;   // objective value (times the column's sign) at that point
};

// Maximizes sign_i * t(h(w), y_i) over the CAP of radius `delta` around each
// column v_i: every categorical assignment theta in Theta_delta(v_i) is
// searched in its own continuous semi-latent ball of radius Delta_theta.
// With only_factual, theta is restricted to v_i's own categorical values.
inline SearchResult cap_search(const Classifier& model, const FairMetric& metric, const Matrix& v, const Vector& y,
                               double delta, const Vector& signs, Target target, const PgdOptions& opt, Rng& rng,
                               bool only_factual = false) {
  const Index m = v.cols();
  const auto& cat = metric.categorical();
  std::vector<Vector> anchors;
  std::vector<double> radii;
  std::vector<Index> owner;
  for (Index i = 0; i < m; ++i) {
    const Instance vi(Vector(v.col(i)));
    const Vector q = metric.to_semi_latent(vi).values();
    if (only_factual) {
      anchors.push_back(q);
      radii.push_back(delta);
      owner.push_back(i);
      continue;
    }
    for (const auto& theta : metric.theta_set(vi, delta)) {
      Vector a = q;
      for (std::size_t k = 0; k < cat.size(); ++k) a[cat[k]] = theta[k];
      anchors.push_back(std::move(a));
      radii.push_back(metric.continuous_radius(theta, vi, delta));
      owner.push_back(i);
    }
  }
  const Index total = static_cast<Index>(anchors.size());
  Matrix a(v.rows(), total);
  Vector r(total);
  Vector yy(total);
  Vector ss(total);
  for (Index c = 0; c < total; ++c) {
    a.col(c) = anchors[static_cast<std::size_t>(c)];
    r[c] = radii[static_cast<std::size_t>(c)];
    yy[c] = y[owner[static_cast<std::size_t>(c)]];
    ss[c] = signs[owner[static_cast<std::size_t>(c)]];
  }
  const auto space = PerturbationSpace::semi_latent(metric);
  const auto found = pgd_maximize(loss_objective(model, space, a, yy, ss, target), space.dim(), r, opt, rng);

  SearchResult out{Matrix(v.rows(), m), Vector::Constant(m, -std::numeric_limits<double>::infinity())};
  for (Index c = 0; c < total; ++c) {
    const Index i = owner[static_cast<std::size_t>(c)];
    if (found.value[c] > out.value[i]) {
      out.value[i] = found.value[c];
      out.points.col(i) = space.map(Vector(a.col(c)), Vector(found.delta.col(c)));
    }
  }
  return out;
}

// Highest-loss point of the CAP of radius delta around each column.
inline SearchResult inner_max_cap_batch(const Classifier& model, const FairMetric& metric, const Matrix& v,
                                        const Vector& y, double delta, const PgdOptions& opt, Rng& rng) {
  return cap_search(model, metric, v, y, delta, Vector::Ones(v.cols()), Target::Loss, opt, rng);
}

// PGD in raw feature space over the continuous coordinates; sign = -1 minimizes.
inline SearchResult raw_search(const Classifier& model, const std::vector<int>& continuous, const Matrix& v,
                               const Vector& y, double delta, double sign, const PgdOptions& opt, Rng& rng) {
  const auto space = PerturbationSpace::raw(continuous);
  const Vector signs = Vector::Constant(v.cols(), sign);
  const auto found = pgd_maximize(loss_objective(model, space, v, y, signs, Target::Loss), space.dim(),
                                  Vector::Constant(v.cols(), delta), opt, rng);
  return {space.map(v, found.delta), found.value};
}

inline SearchResult inner_max_plain_batch(const Classifier& model, const std::vector<int>& continuous,
                                          const Matrix& v, const Vector& y, double delta, const PgdOptions& opt,
                                          Rng& rng) {
  return raw_search(model, continuous, v, y, delta, 1.0, opt, rng);
}

struct GammaResult {
  Vector value;     // |r(delta*)|, r(delta) = f(delta) - f(0) - delta^T grad f(0)
  Vector residual;  // signed r(delta*)
  Matrix delta;     // maximizer per column
  Vector f0;        // f(0)
  Matrix g0;        // grad f(0), dim x m
};

// Largest absolute linearization error of delta -> t(h(map(anchor, delta)), y)
// over the ball of radius `radius`. The first PGD run starts at the boundary
// point radius * dual_direction(grad f(0)); `pool` adds candidate deltas
// (each dim x m) that are evaluated and kept if better.
inline GammaResult gamma_batch(const Classifier& model, const PerturbationSpace& space, const Matrix& anchors,
                               const Vector& y, double radius, const PgdOptions& opt, Rng& rng,
                               Target target = Target::Loss, const std::vector<Matrix>& pool = {}) {
  const Index m = anchors.cols();
  const Index k = space.dim();
  GammaResult out;
  const Evaluation base = evaluate(model, space, anchors, y, Matrix::Zero(k, m), target, true);
  out.f0 = base.value;
  out.g0 = base.grad;
  auto residual = [&](const Matrix& deltas, bool with_grad, Vector* signed_r) {
    Evaluation ev = evaluate(model, space, anchors, y, deltas, target, with_grad);
    Vector r = ev.value - out.f0 - (deltas.array() * out.g0.array()).colwise().sum().transpose().matrix();
    if (signed_r) *signed_r = r;
    if (with_grad) {
      ev.grad -= out.g0;
      for (Index i = 0; i < m; ++i) ev.grad.col(i) *= r[i] > 0.0 ? 1.0 : (r[i] < 0.0 ? -1.0 : 0.0);
    }
    ev.value = r.cwiseAbs();
    return ev;
  };

  out.delta = Matrix::Zero(k, m);
  out.value = Vector::Zero(m);
  if (k > 0 && radius > 0.0) {
    Matrix start(k, m);
    for (Index i = 0; i < m; ++i) {
      start.col(i) = project_ball(radius * dual_direction(out.g0.col(i), opt.p), radius, opt.p);
    }
    const auto found = pgd_maximize([&](const Matrix& d, bool g) { return residual(d, g, nullptr); }, k,
                                    Vector::Constant(m, radius), opt, rng, start);
    out.delta = found.delta;
    out.value = found.value;
    for (const auto& candidate : pool) {
      const Vector val = residual(candidate, false, nullptr).value;
      for (Index i = 0; i < m; ++i) {
        if (val[i] > out.value[i]) {
          out.value[i] = val[i];
          out.delta.col(i) = candidate.col(i);
        }
      }
    }
  }
  residual(out.delta, false, &out.residual);
  out.value = out.residual.cwiseAbs();
  return out;
}

// Weights and scaling of the two local-linearity terms shared by LLR and CAPIFY:
//   w_gamma * gamma(radius, v) + w_grad * grad_scale * ||grad f(v)||_*.
struct LocalLinearityTerms {
  double w_gamma = 1.0;
  double w_grad = 1.0;
  double grad_scale = 1.0;
  double fd_step = 1e-3;
};

// Appends finite-difference surrogate rows for both terms and returns the
// per-column exact term values.
inline Vector local_linearity_rows(const Classifier& model, const PerturbationSpace& space, const Matrix& anchors,
                                   const Vector& y, double radius, const LocalLinearityTerms& terms,
                                   const PgdOptions& opt, Rng& rng, ObjectiveRows& rows) {
  const Index m = anchors.cols();
  const Index k = space.dim();
  const double h = terms.fd_step;
  Vector value = Vector::Zero(m);
  if (k == 0 || (terms.w_gamma == 0.0 && terms.w_grad == 0.0)) return value;

  if (terms.w_gamma != 0.0 && radius > 0.0) {
    const GammaResult g = gamma_batch(model, space, anchors, y, radius, opt, rng);
    for (Index i = 0; i < m; ++i) {
      value[i] += terms.w_gamma * g.value[i];
      const double r = g.residual[i];
      if (r == 0.0) continue;
      const double s = (r > 0.0 ? 1.0 : -1.0) * terms.w_gamma;
      const Vector a = anchors.col(i);
      const Vector d = g.delta.col(i);
      const double len = d.norm();
      rows.add(space.map(a, d), y[i], s);
      rows.add(space.map(a, Vector::Zero(k)), y[i], -s);
      if (len > 0.0) {
        const Vector unit = d / len;
        const double c = s * len / (2.0 * h);
        rows.add(space.map(a, h * unit), y[i], -c);
        rows.add(space.map(a, -h * unit), y[i], c);
      }
    }
  }

  if (terms.w_grad != 0.0) {
    const Evaluation base = evaluate(model, space, anchors, y, Matrix::Zero(k, m), Target::Loss, true);
    const double c = terms.w_grad * terms.grad_scale / (2.0 * h);
    for (Index i = 0; i < m; ++i) {
      const Vector g = base.grad.col(i);
      value[i] += terms.w_grad * terms.grad_scale * dual_norm(g, opt.p);
      const Vector d = dual_direction(g, opt.p);
      if (d.isZero(0.0) || c == 0.0) continue;
      const Vector a = anchors.col(i);
      rows.add(space.map(a, h * d), y[i], c);
      rows.add(space.map(a, -h * d), y[i], -c);
    }
  }
  return value;
}

struct CapifyWeights {
  double mu1 = 1.0;
  double mu2 = 1.0;
  double mu3 = 1.0;
  double fd_step = 1e-3;
};

// Worst-twin loss per column: max over sensitive assignments s of l(h(v_s), y).
inline SearchResult worst_twin_batch(const Classifier& model, const FairMetric& metric, const Matrix& v,
                                     const Vector& y) {
  const Index m = v.cols();
  SearchResult out{Matrix(v.rows(), m), Vector(m)};
  std::vector<Instance> all;
  std::vector<Index> owner;
  for (Index i = 0; i < m; ++i) {
    for (auto& t : metric.scm().twins(Instance(Vector(v.col(i))))) {
      all.push_back(std::move(t));
      owner.push_back(i);
    }
  }
  Matrix x(v.rows(), static_cast<Index>(all.size()));
  Vector yy(x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    x.col(c) = all[static_cast<std::size_t>(c)].values();
    yy[c] = y[owner[static_cast<std::size_t>(c)]];
  }
  Vector losses;
  model.backward(x, yy, Vector::Ones(x.cols()), Target::Loss, nullptr, nullptr, &losses);
  out.value.setConstant(-std::numeric_limits<double>::infinity());
  for (Index c = 0; c < x.cols(); ++c) {
    const Index i = owner[static_cast<std::size_t>(c)];
    if (losses[c] > out.value[i]) {
      out.value[i] = losses[c];
      out.points.col(i) = x.col(c);
    }
  }
  return out;
}

// mu1 * max_s l(h(v_s), y) + mu2 * gamma(delta, v) + mu3 * delta * ||grad f(v)||_*,
// with f(d) = l(h(T^{-1}(T(v) + d)), y). Appends surrogate rows and returns
// per-column values.
inline Vector capify_rows(const Classifier& model, const FairMetric& metric, const Matrix& v, const Vector& y,
                          double delta, const CapifyWeights& w, const PgdOptions& opt, Rng& rng, ObjectiveRows& rows) {
  const Index m = v.cols();
  Vector value = Vector::Zero(m);
  if (w.mu1 != 0.0) {
    const SearchResult twins = worst_twin_batch(model, metric, v, y);
    for (Index i = 0; i < m; ++i) {
      value[i] += w.mu1 * twins.value[i];
      rows.add(twins.points.col(i), y[i], w.mu1);
    }
  }
  if (w.mu2 != 0.0 || w.mu3 != 0.0) {
    const auto space = PerturbationSpace::semi_latent(metric);
    Matrix anchors(v.rows(), m);
    for (Index i = 0; i < m; ++i) anchors.col(i) = space.anchor(Instance(Vector(v.col(i))));
    value += local_linearity_rows(model, space, anchors, y, delta, {w.mu2, w.mu3, delta, w.fd_step}, opt, rng, rows);
  }
  return value;
}

// Single-instance forms.

inline Instance inner_max_plain(const Classifier& model, const std::vector<int>& continuous, const Instance& v,
                                double y, double delta, const PgdOptions& opt, Rng& rng) {
  const auto r = inner_max_plain_batch(model, continuous, Matrix(v.values()), Vector::Constant(1, y), delta, opt, rng);
  return Instance(Vector(r.points.col(0)));
}

struct CapMax {
  Instance point;
  double loss;
};

inline CapMax inner_max_cap(const Classifier& model, const FairMetric& metric, const Instance& v, double y,
                            double delta, const PgdOptions& opt, Rng& rng) {
  const auto r = inner_max_cap_batch(model, metric, Matrix(v.values()), Vector::Constant(1, y), delta, opt, rng);
  return {Instance(Vector(r.points.col(0))), r.value[0]};
}

inline double capify_regularizer(const Classifier& model, const FairMetric& metric, const Instance& v, double y,
                                 double delta, const CapifyWeights& w, const PgdOptions& opt, Rng& rng) {
  ObjectiveRows rows;
  return capify_rows(model, metric, Matrix(v.values()), Vector::Constant(1, y), delta, w, opt, rng, rows)[0];
}

inline double gamma_estimate(const Classifier& model, const FairMetric& metric, const Instance& v, double y,
                             double delta, const PgdOptions& opt, Rng& rng, Target target = Target::Loss,
                             const std::vector<Vector>& pool = {}) {
  const auto space = PerturbationSpace::semi_latent(metric);
  const Matrix anchors = space.anchor(v);
  std::vector<Matrix> candidates;
  for (const auto& d : pool) candidates.emplace_back(d);
  return gamma_batch(model, space, anchors, Vector::Constant(1, y), delta, opt, rng, target, candidates).value[0];
}

}  // namespace capfair
