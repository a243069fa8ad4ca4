#pragma once

#include "capfair/core/types.hpp"
#include "capfair/scm/expression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace capfair {

enum class NodeKind { Continuous, Categorical };

struct Bernoulli {
  double p = 0.5;
};
struct Normal {
  double mean = 0.0;
  double variance = 1.0;
};
struct Gamma {
  double shape = 1.0;
  double scale = 1.0;
};
using NoiseDist = std::variant<Bernoulli, Normal, Gamma>;

// Coefficients are aligned with NodeSpec::parents.
struct LinearMechanism {
  std::vector<double> coefficients;
  double intercept = 0.0;
};
// Expression over node indices; every referenced node must be a parent.
struct ExpressionMechanism {
  Expression expr;
};
using Mechanism = std::variant<LinearMechanism, ExpressionMechanism>;

// Outer link applied to mechanism + noise. Identity gives the additive-noise
// form; Logistic gives offset + logistic(f + U), which is still invertible in U.
enum class Link { Identity, Logistic };

struct NodeSpec {
  std::string name;
  NodeKind kind = NodeKind::Continuous;
  std::vector<double> levels;  // categorical only
  std::vector<int> parents;
  Mechanism mechanism = LinearMechanism{};
  Link link = Link::Identity;
  double link_offset = 0.0;
  NoiseDist noise = Normal{};
  // Observed coordinate is (raw - offset) / scale. Mechanisms always see raw values.
  double scale = 1.0;
  double offset = 0.0;
  // Intervention state.
  std::optional<double> fixed;  // hard: V_i := fixed
  double shift = 0.0;           // additive: exogenous coordinate shifted by `shift`
};

struct Intervention {
  enum class Kind { Hard, Additive, Middle };
  struct Target {
    int node;
    double value;
  };

  Kind kind = Kind::Hard;
  std::vector<Target> hard;
  std::vector<Target> additive;

  static Intervention set(std::vector<Target> targets) { return {Kind::Hard, std::move(targets), {}}; }
  static Intervention shift(std::vector<Target> targets) {
    return {Kind::Additive, {}, std::move(targets)};
  }
  static Intervention middle(std::vector<Target> hard_part, std::vector<Target> additive_part) {
    return {Kind::Middle, std::move(hard_part), std::move(additive_part)};
  }
};

namespace detail {

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline std::string noise_error(const NoiseDist& d) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Bernoulli>) {
          if (!(x.p >= 0.0 && x.p <= 1.0)) return "Bernoulli p must lie in [0,1]";
        } else if constexpr (std::is_same_v<T, Normal>) {
          if (!(x.variance > 0.0) || !std::isfinite(x.mean)) return "Normal variance must be > 0";
        } else {
          if (!(x.shape > 0.0 && x.scale > 0.0)) return "Gamma parameters must be > 0";
        }
        return {};
      },
      d);
}

inline double draw(const NoiseDist& d, Rng& rng) {
  return std::visit(
      [&rng](const auto& x) -> double {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Bernoulli>) {
          return std::bernoulli_distribution(x.p)(rng) ? 1.0 : 0.0;
        } else if constexpr (std::is_same_v<T, Normal>) {
          return std::normal_distribution<double>(x.mean, std::sqrt(x.variance))(rng);
        } else {
          return std::gamma_distribution<double>(x.shape, x.scale)(rng);
        }
      },
      d);
}

}  // namespace detail

class ScmSpec {
 public:
  ScmSpec() = default;

  ScmSpec(std::string name, std::vector<NodeSpec> nodes, std::vector<int> sensitive)
      : name_(std::move(name)), nodes_(std::move(nodes)), sensitive_(std::move(sensitive)) {
    validate();
  }

  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] Index size() const { return static_cast<Index>(nodes_.size()); }
  [[nodiscard]] const NodeSpec& node(Index i) const { return nodes_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] const std::vector<NodeSpec>& nodes() const { return nodes_; }
  [[nodiscard]] const std::vector<int>& sensitive() const { return sensitive_; }

  [[nodiscard]] bool is_sensitive(Index i) const {
    return std::find(sensitive_.begin(), sensitive_.end(), static_cast<int>(i)) != sensitive_.end();
  }
  [[nodiscard]] bool is_categorical(Index i) const { return node(i).kind == NodeKind::Categorical; }

  [[nodiscard]] int index_of(std::string_view name) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  [[nodiscard]] std::vector<int> categorical_indices() const {
    std::vector<int> out;
    for (Index i = 0; i < size(); ++i) {
      if (is_categorical(i)) out.push_back(static_cast<int>(i));
    }
    return out;
  }

  [[nodiscard]] std::vector<int> continuous_indices() const {
    std::vector<int> out;
    for (Index i = 0; i < size(); ++i) {
      if (!is_categorical(i)) out.push_back(static_cast<int>(i));
    }
    return out;
  }

  [[nodiscard]] std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& n : nodes_) out.push_back(n.name);
    return out;
  }

  // True when every continuous mechanism is linear with an identity link, so
  // the push-forward map is affine.
  [[nodiscard]] bool is_linear() const {
    return std::all_of(nodes_.begin(), nodes_.end(), [](const NodeSpec& n) {
      return n.kind == NodeKind::Categorical ||
             (std::holds_alternative<LinearMechanism>(n.mechanism) && n.link == Link::Identity);
    });
  }

  [[nodiscard]] bool is_intervened() const {
    return std::any_of(nodes_.begin(), nodes_.end(),
                       [](const NodeSpec& n) { return n.fixed.has_value() || n.shift != 0.0; });
  }

  [[nodiscard]] ExogenousPoint abduct(const Instance& v) const {
    check_dim(v.size());
    ExogenousPoint u(size());
    std::vector<double> raw(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& nd = nodes_[i];
      const double vi = v[static_cast<Index>(i)];
      raw[i] = nd.scale * vi + nd.offset;
      if (nd.kind == NodeKind::Categorical) {
        u[static_cast<Index>(i)] = vi;
        continue;
      }
      if (nd.fixed) {
        u[static_cast<Index>(i)] = 0.0;
        continue;
      }
      const double pre = nd.link == Link::Identity ? raw[i] : detail::logit(raw[i] - nd.link_offset);
      const double e = pre - mechanism_value(nd, raw);
      u[static_cast<Index>(i)] = e / nd.scale - nd.shift;
    }
    return u;
  }

  [[nodiscard]] Instance push_forward(const ExogenousPoint& u) const {
    check_dim(u.size());
    Instance v(size());
    std::vector<double> raw(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const double vi = observe(i, u[static_cast<Index>(i)], raw);
      v[static_cast<Index>(i)] = vi;
      raw[i] = nodes_[i].scale * vi + nodes_[i].offset;
    }
    return v;
  }

  [[nodiscard]] ScmSpec intervene(const Intervention& iv) const {
    validate_intervention(iv);
    ScmSpec out = *this;
    for (const auto& t : iv.hard) out.nodes_[static_cast<std::size_t>(t.node)].fixed = t.value;
    for (const auto& t : iv.additive) out.nodes_[static_cast<std::size_t>(t.node)].shift += t.value;
    return out;
  }

  [[nodiscard]] Instance counterfactual(const Instance& v, const Intervention& iv) const {
    return intervene(iv).push_forward(abduct(v));
  }

  // All assignments of the sensitive attributes, in lexicographic level order.
  [[nodiscard]] std::vector<std::vector<double>> sensitive_assignments() const {
    return level_assignments(sensitive_);
  }

  [[nodiscard]] std::vector<std::vector<double>> level_assignments(const std::vector<int>& idx) const {
    std::vector<std::vector<double>> out{{}};
    for (int i : idx) {
      std::vector<std::vector<double>> next;
      for (const auto& prefix : out) {
        for (double level : node(i).levels) {
          auto a = prefix;
          a.push_back(level);
          next.push_back(std::move(a));
        }
      }
      out = std::move(next);
    }
    return out;
  }

  [[nodiscard]] std::vector<Instance> twins(const Instance& v) const {
    if (sensitive_.empty()) throw Error("scm '" + name_ + "' declares no sensitive attribute");
    std::vector<Instance> out;
    const ExogenousPoint u = abduct(v);
    for (const auto& assignment : sensitive_assignments()) {
      std::vector<Intervention::Target> targets;
      for (std::size_t k = 0; k < sensitive_.size(); ++k) targets.push_back({sensitive_[k], assignment[k]});
      out.push_back(intervene(Intervention::set(std::move(targets))).push_forward(u));
    }
    return out;
  }

  [[nodiscard]] ExogenousPoint sample_exogenous(Rng& rng) const {
    ExogenousPoint u(size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& nd = nodes_[i];
      const double e = detail::draw(nd.noise, rng);
      if (nd.kind == NodeKind::Categorical) {
        u[static_cast<Index>(i)] = nd.levels[e > 0.5 ? 1 : 0];
      } else {
        u[static_cast<Index>(i)] = e / nd.scale;
      }
    }
    return u;
  }

  [[nodiscard]] std::vector<Instance> sample(std::size_t n, std::uint64_t seed) const {
    if (n == 0) throw Error("sample: n must be >= 1");
    Rng rng(seed);
    std::vector<Instance> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) out.push_back(push_forward(sample_exogenous(rng)));
    return out;
  }

  // Jacobian dv/du of the push-forward map at u. Hard-fixed and categorical
  // coordinates have zero rows except for categorical roots (v_i = u_i).
  [[nodiscard]] Matrix jacobian(const ExogenousPoint& u) const {
    const Index n = size();
    Matrix jac = Matrix::Zero(n, n);
    std::vector<double> raw(nodes_.size());
    std::vector<double> dfdraw(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& nd = nodes_[i];
      const Index ii = static_cast<Index>(i);
      const double vi = observe(i, u[ii], raw);
      raw[i] = nd.scale * vi + nd.offset;
      if (nd.fixed) continue;
      if (nd.kind == NodeKind::Categorical) {
        jac(ii, ii) = 1.0;
        continue;
      }
      double link_slope = 1.0;
      if (nd.link == Link::Logistic) {
        const double sig = raw[i] - nd.link_offset;
        link_slope = sig * (1.0 - sig);
      }
      mechanism_grad(nd, raw, dfdraw);
      jac(ii, ii) = link_slope;
      for (int p : nd.parents) {
        const double local = link_slope * dfdraw[static_cast<std::size_t>(p)] * nodes_[static_cast<std::size_t>(p)].scale / nd.scale;
        jac.row(ii) += local * jac.row(p);
      }
    }
    return jac;
  }

  // Raw-unit mechanism value f_i(raw parents), without noise or link.
  [[nodiscard]] double mechanism_value(const NodeSpec& nd, std::span<const double> raw) const {
    return std::visit(
        [&](const auto& m) -> double {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, LinearMechanism>) {
            double acc = m.intercept;
            for (std::size_t k = 0; k < nd.parents.size(); ++k) {
              acc += m.coefficients[k] * raw[static_cast<std::size_t>(nd.parents[k])];
            }
            return acc;
          } else {
            return m.expr.eval(raw);
          }
        },
        nd.mechanism);
  }

 private:
  void check_dim(Index n) const {
    if (n != size()) {
      throw Error("dimension mismatch: scm '" + name_ + "' has " + std::to_string(size()) +
                  " nodes, got " + std::to_string(n));
    }
  }

  // Observed value of node i given its exogenous coordinate and the raw values
  // of already-evaluated predecessors.
  [[nodiscard]] double observe(std::size_t i, double ui, std::span<const double> raw) const {
    const auto& nd = nodes_[i];
    if (nd.fixed) return *nd.fixed;
    if (nd.kind == NodeKind::Categorical) return ui;
    const double pre = mechanism_value(nd, raw) + nd.scale * (ui + nd.shift);
    const double r = nd.link == Link::Identity ? pre : nd.link_offset + Expression::logistic(pre);
    return (r - nd.offset) / nd.scale;
  }

  void mechanism_grad(const NodeSpec& nd, std::span<const double> raw, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, LinearMechanism>) {
            for (std::size_t k = 0; k < nd.parents.size(); ++k) {
              out[static_cast<std::size_t>(nd.parents[k])] += m.coefficients[k];
            }
          } else {
            m.expr.eval_grad(raw, out);
          }
        },
        nd.mechanism);
  }

  void validate() const {
    if (nodes_.empty()) throw Error("scm '" + name_ + "' has no nodes");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& nd = nodes_[i];
      const std::string where = "scm '" + name_ + "', node '" + nd.name + "': ";
      if (nd.name.empty()) throw Error("scm '" + name_ + "': node " + std::to_string(i) + " has no name");
      for (std::size_t j = 0; j < i; ++j) {
        if (nodes_[j].name == nd.name) throw Error(where + "duplicate node name");
      }
      for (int p : nd.parents) {
        if (p < 0 || static_cast<std::size_t>(p) >= nodes_.size()) throw Error(where + "parent index out of range");
        if (static_cast<std::size_t>(p) >= i) {
          throw Error(where + "parent '" + nodes_[static_cast<std::size_t>(p)].name +
                      "' does not precede it; nodes must be listed in topological order of a DAG");
        }
      }
      if (auto msg = detail::noise_error(nd.noise); !msg.empty()) throw Error(where + msg);
      if (!(nd.scale > 0.0) || !std::isfinite(nd.scale) || !std::isfinite(nd.offset)) {
        throw Error(where + "scale must be positive and finite");
      }
      if (nd.kind == NodeKind::Categorical) {
        if (!nd.parents.empty()) {
          throw Error(where + "categorical nodes must be roots (counterfactuals for categorical nodes "
                              "with parents are undefined)");
        }
        if (!std::holds_alternative<Bernoulli>(nd.noise)) throw Error(where + "categorical noise must be Bernoulli");
        if (nd.levels.size() != 2 || nd.levels[0] == nd.levels[1]) {
          throw Error(where + "categorical node needs exactly two distinct levels");
        }
        if (nd.scale != 1.0 || nd.offset != 0.0 || nd.link != Link::Identity) {
          throw Error(where + "categorical nodes cannot be rescaled or linked");
        }
        if (nd.fixed && std::find(nd.levels.begin(), nd.levels.end(), *nd.fixed) == nd.levels.end()) {
          throw Error(where + "fixed value outside the level set");
        }
        continue;
      }
      std::visit(
          [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LinearMechanism>) {
              if (m.coefficients.size() != nd.parents.size()) {
                throw Error(where + "linear mechanism needs one coefficient per parent");
              }
            } else {
              for (int var : m.expr.variables()) {
                if (std::find(nd.parents.begin(), nd.parents.end(), var) == nd.parents.end()) {
                  throw Error(where + "mechanism references a non-parent node");
                }
              }
            }
          },
          nd.mechanism);
    }
    for (int s : sensitive_) {
      if (s < 0 || s >= static_cast<int>(nodes_.size())) throw Error("scm '" + name_ + "': sensitive index out of range");
      if (nodes_[static_cast<std::size_t>(s)].kind != NodeKind::Categorical) {
        throw Error("scm '" + name_ + "': sensitive attribute '" + nodes_[static_cast<std::size_t>(s)].name +
                    "' must be categorical");
      }
      if (std::count(sensitive_.begin(), sensitive_.end(), s) > 1) {
        throw Error("scm '" + name_ + "': duplicate sensitive attribute");
      }
    }
  }

  void validate_intervention(const Intervention& iv) const {
    auto check_target = [&](const Intervention::Target& t) {
      if (t.node < 0 || t.node >= static_cast<int>(nodes_.size())) {
        throw Error("intervention target " + std::to_string(t.node) + " out of range");
      }
    };
    for (const auto& t : iv.hard) {
      check_target(t);
      const auto& nd = nodes_[static_cast<std::size_t>(t.node)];
      if (nd.kind == NodeKind::Categorical &&
          std::find(nd.levels.begin(), nd.levels.end(), t.value) == nd.levels.end()) {
        throw Error("hard value " + std::to_string(t.value) + " is not a level of '" + nd.name + "'");
      }
      if (iv.kind == Intervention::Kind::Middle && nd.kind != NodeKind::Categorical) {
        throw Error("middle intervention: hard part must target categorical nodes");
      }
    }
    for (const auto& t : iv.additive) {
      check_target(t);
      const auto& nd = nodes_[static_cast<std::size_t>(t.node)];
      if (nd.kind == NodeKind::Categorical) throw Error("additive intervention on categorical node '" + nd.name + "'");
      if (!std::isfinite(t.value)) throw Error("additive shift must be finite");
      for (const auto& h : iv.hard) {
        if (h.node == t.node) throw Error("hard and additive targets must be disjoint");
      }
    }
    if (iv.kind == Intervention::Kind::Hard && !iv.additive.empty()) throw Error("hard intervention with shifts");
    if (iv.kind == Intervention::Kind::Additive && !iv.hard.empty()) throw Error("additive intervention with hard targets");
  }

  std::string name_;
  std::vector<NodeSpec> nodes_;
  std::vector<int> sensitive_;
};

// Resolver that binds identifiers to node indices of `nodes`.
inline Expression::Resolver node_resolver(const std::vector<NodeSpec>& nodes) {
  return [&nodes](std::string_view name) -> int {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].name == name) return static_cast<int>(i);
    }
    return -1;
  };
}

}  // namespace capfair
