#pragma once

// Semi-latent geometry of an SCM: the transform T (sensitive coordinates kept
// observed, everything else replaced by its exogenous noise), the product
// metric on that space, the causal fair metric d_fair(v, w) = d_Q(T v, T w),
// and causal adversarial perturbation (CAP) balls.
//
// Components are combined with an L2 product metric: each categorical node is
// one component (sensitive nodes use their configured pseudometric, other
// categorical nodes the discrete metric), and the continuous block is one
// component measured with the configured l_p norm.

#include "capfair/core/norms.hpp"
#include "capfair/scm/scm.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace capfair {

class Pseudometric {
 public:
  enum class Kind { Trivial, Discrete, Table };

  static Pseudometric trivial() { return Pseudometric(Kind::Trivial, {}); }
  static Pseudometric discrete() { return Pseudometric(Kind::Discrete, {}); }

  // Symmetric, nonnegative, zero diagonal, satisfies the triangle inequality.
  static Pseudometric table(Matrix d) {
    if (d.rows() != d.cols() || d.rows() == 0) throw Error("pseudometric table must be square and nonempty");
    const Index k = d.rows();
    for (Index a = 0; a < k; ++a) {
      if (d(a, a) != 0.0) throw Error("pseudometric table: d(x,x) must be 0");
      for (Index b = 0; b < k; ++b) {
        if (!(d(a, b) >= 0.0) || !std::isfinite(d(a, b))) throw Error("pseudometric table: entries must be >= 0");
        if (d(a, b) != d(b, a)) throw Error("pseudometric table: must be symmetric");
        for (Index c = 0; c < k; ++c) {
          if (d(a, c) > d(a, b) + d(b, c) + 1e-12) throw Error("pseudometric table: triangle inequality violated");
        }
      }
    }
    return Pseudometric(Kind::Table, std::move(d));
  }

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] const Matrix& table_values() const { return table_; }

  // Distance between level positions a and b.
  [[nodiscard]] double distance(Index a, Index b) const {
    switch (kind_) {
      case Kind::Trivial: return 0.0;
      case Kind::Discrete: return a == b ? 0.0 : 1.0;
      default:
        if (a >= table_.rows() || b >= table_.rows()) throw Error("pseudometric table smaller than level set");
        return table_(a, b);
    }
  }

 private:
  Pseudometric(Kind k, Matrix t) : kind_(k), table_(std::move(t)) {}
  Kind kind_;
  Matrix table_;
};

struct MetricConfig {
  // One entry per sensitive attribute, or a single entry applied to all.
  std::vector<Pseudometric> sensitive{Pseudometric::trivial()};
  NormP p = NormP::L2;

  [[nodiscard]] NormP dual_p() const { return conjugate(p); }

  [[nodiscard]] const Pseudometric& for_sensitive(std::size_t k) const {
    if (sensitive.empty()) throw Error("metric config has no sensitive pseudometric");
    return sensitive.size() == 1 ? sensitive.front() : sensitive.at(k);
  }

  static MetricConfig protected_l2() { return {}; }
};

struct CapBall {
  Instance center;
  double radius = 0.0;

  CapBall(Instance c, double r) : center(std::move(c)), radius(r) {
    if (!(r >= 0.0)) throw Error("CAP radius must be >= 0");
  }
};

// Boundary tolerance for ball membership.
inline constexpr double kBallTolerance = 1e-9;

class FairMetric {
 public:
  FairMetric(ScmSpec scm, MetricConfig cfg) : scm_(std::move(scm)), cfg_(std::move(cfg)) {
    if (scm_.is_intervened()) throw Error("fair metric needs a non-intervened scm");
    categorical_ = scm_.categorical_indices();
    continuous_ = scm_.continuous_indices();
    if (cfg_.sensitive.size() != 1 && cfg_.sensitive.size() != scm_.sensitive().size()) {
      throw Error("metric config: need one pseudometric per sensitive attribute");
    }
    for (std::size_t k = 0; k < scm_.sensitive().size(); ++k) {
      const auto& pm = cfg_.for_sensitive(k);
      if (pm.kind() == Pseudometric::Kind::Table &&
          pm.table_values().rows() != static_cast<Index>(scm_.node(scm_.sensitive()[k]).levels.size())) {
        throw Error("metric config: pseudometric table size does not match the level set");
      }
    }
  }

  [[nodiscard]] const ScmSpec& scm() const { return scm_; }
  [[nodiscard]] const MetricConfig& config() const { return cfg_; }
  [[nodiscard]] const std::vector<int>& categorical() const { return categorical_; }
  [[nodiscard]] const std::vector<int>& continuous() const { return continuous_; }
  [[nodiscard]] Index continuous_dim() const { return static_cast<Index>(continuous_.size()); }

  // q_i = v_i for sensitive i, the abducted noise otherwise.
  [[nodiscard]] SemiLatentPoint to_semi_latent(const Instance& v) const {
    const ExogenousPoint u = scm_.abduct(v);
    SemiLatentPoint q(u.values());
    for (int s : scm_.sensitive()) q[s] = v[s];
    return q;
  }

  // Sensitive nodes are categorical roots, so evaluating the structural
  // equations with q as the exogenous input yields v_i = q_i on them.
  [[nodiscard]] Instance from_semi_latent(const SemiLatentPoint& q) const {
    return scm_.push_forward(ExogenousPoint(q.values()));
  }

  // T^{-1}(T(v) masked with theta on `targets`); equals the hard-intervention counterfactual.
  [[nodiscard]] Instance counterfactual_via_mask(const Instance& v, const std::vector<Intervention::Target>& targets) const {
    SemiLatentPoint q = to_semi_latent(v);
    for (const auto& t : targets) {
      if (t.node < 0 || t.node >= scm_.size()) throw Error("mask target out of range");
      const auto& nd = scm_.node(t.node);
      if (nd.kind != NodeKind::Categorical) throw Error("mask targets must be categorical nodes");
      if (std::find(nd.levels.begin(), nd.levels.end(), t.value) == nd.levels.end()) {
        throw Error("mask value is not a level of '" + nd.name + "'");
      }
      q[t.node] = t.value;
    }
    return from_semi_latent(q);
  }

  // Per-component distance of a categorical node between two level values.
  [[nodiscard]] double categorical_component(int node, double a, double b) const {
    const auto& levels = scm_.node(node).levels;
    const Index pa = level_position(levels, a);
    const Index pb = level_position(levels, b);
    const auto& sens = scm_.sensitive();
    for (std::size_t k = 0; k < sens.size(); ++k) {
      if (sens[k] == node) return cfg_.for_sensitive(k).distance(pa, pb);
    }
    return pa == pb ? 0.0 : 1.0;
  }

  // d_Z between a categorical assignment (ordered as categorical()) and v's categorical part.
  [[nodiscard]] double categorical_distance(const std::vector<double>& theta, const Instance& v) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < categorical_.size(); ++k) {
      const double d = categorical_component(categorical_[k], theta[k], v[categorical_[k]]);
      acc += d * d;
    }
    return std::sqrt(acc);
  }

  [[nodiscard]] Vector continuous_part(const SemiLatentPoint& q) const {
    Vector x(continuous_dim());
    for (Index k = 0; k < x.size(); ++k) x[k] = q[continuous_[static_cast<std::size_t>(k)]];
    return x;
  }

  [[nodiscard]] double semi_latent_distance(const SemiLatentPoint& a, const SemiLatentPoint& b) const {
    double acc = 0.0;
    for (int c : categorical_) {
      const double d = categorical_component(c, a[c], b[c]);
      acc += d * d;
    }
    const double dx = norm(continuous_part(a) - continuous_part(b), cfg_.p);
    return std::sqrt(acc + dx * dx);
  }

  [[nodiscard]] double distance(const Instance& v, const Instance& w) const {
    return semi_latent_distance(to_semi_latent(v), to_semi_latent(w));
  }

  // Categorical assignments (ordered as categorical()) within distance delta of v.
  [[nodiscard]] std::vector<std::vector<double>> theta_set(const Instance& v, double delta) const {
    if (!(delta >= 0.0)) throw Error("theta_set: radius must be >= 0");
    std::vector<std::vector<double>> out;
    for (auto& theta : scm_.level_assignments(categorical_)) {
      if (categorical_distance(theta, v) <= delta + kBallTolerance) out.push_back(std::move(theta));
    }
    return out;
  }

  // Continuous radius left for assignment theta inside a ball of radius delta.
  [[nodiscard]] double continuous_radius(const std::vector<double>& theta, const Instance& v, double delta) const {
    const double dz = categorical_distance(theta, v);
    return std::sqrt(std::max(0.0, delta * delta - dz * dz));
  }

  // Smallest positive distance between categorical assignments; below it the
  // CAP is exactly the union of continuous balls around the twins.
  [[nodiscard]] double delta0() const {
    const auto all = scm_.level_assignments(categorical_);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : all) {
      Instance probe(scm_.size());
      for (std::size_t k = 0; k < categorical_.size(); ++k) probe[categorical_[k]] = a[k];
      for (const auto& b : all) {
        const double d = categorical_distance(b, probe);
        if (d > 0.0) best = std::min(best, d);
      }
    }
    return best;
  }

  [[nodiscard]] bool contains(const CapBall& ball, const Instance& w) const {
    return distance(ball.center, w) <= ball.radius + kBallTolerance;
  }

  // Counterfactual of v under the categorical assignment theta.
  [[nodiscard]] Instance apply_theta(const Instance& v, const std::vector<double>& theta) const {
    SemiLatentPoint q = to_semi_latent(v);
    for (std::size_t k = 0; k < categorical_.size(); ++k) q[categorical_[k]] = theta[k];
    return from_semi_latent(q);
  }

  // T^{-1}(T(v) + delta) with delta living on the continuous coordinates.
  [[nodiscard]] Instance perturb(const Instance& v, const Vector& delta) const {
    SemiLatentPoint q = to_semi_latent(v);
    return perturb_semi_latent(q, delta);
  }

  [[nodiscard]] Instance perturb_semi_latent(SemiLatentPoint q, const Vector& delta) const {
    for (Index k = 0; k < delta.size(); ++k) q[continuous_[static_cast<std::size_t>(k)]] += delta[k];
    return from_semi_latent(q);
  }

  // Coverage sampler over the CAP: uniform over Theta_delta, then uniform in
  // the continuous disk of radius Delta_theta around the counterfactual.
  [[nodiscard]] std::vector<Instance> sample(const CapBall& ball, std::size_t n, std::uint64_t seed) const {
    if (n == 0) throw Error("cap_sample: n must be >= 1");
    Rng rng(seed);
    const auto thetas = theta_set(ball.center, ball.radius);
    std::uniform_int_distribution<std::size_t> pick(0, thetas.size() - 1);
    std::vector<Instance> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& theta = thetas[pick(rng)];
      const double r = continuous_radius(theta, ball.center, ball.radius);
      SemiLatentPoint q = to_semi_latent(ball.center);
      for (std::size_t c = 0; c < categorical_.size(); ++c) q[categorical_[c]] = theta[c];
      out.push_back(perturb_semi_latent(std::move(q), sample_ball(continuous_dim(), r, cfg_.p, rng)));
    }
    return out;
  }

  // dv/dq restricted to the continuous semi-latent columns (n x k).
  [[nodiscard]] Matrix continuous_jacobian(const SemiLatentPoint& q) const {
    const Matrix full = scm_.jacobian(ExogenousPoint(q.values()));
    Matrix out(scm_.size(), continuous_dim());
    for (Index k = 0; k < out.cols(); ++k) out.col(k) = full.col(continuous_[static_cast<std::size_t>(k)]);
    return out;
  }

 private:
  static Index level_position(const std::vector<double>& levels, double value) {
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (levels[i] == value) return static_cast<Index>(i);
    }
    throw Error("value " + std::to_string(value) + " is not a declared level");
  }

  ScmSpec scm_;
  MetricConfig cfg_;
  std::vector<int> categorical_;
  std::vector<int> continuous_;
};

}  // namespace capfair
