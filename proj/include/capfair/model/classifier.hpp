#pragma once

#include "capfair/core/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace capfair {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline constexpr double kProbClamp = 1e-7;

// Binary cross-entropy on a logit with the probability clamped to
// [kProbClamp, 1 - kProbClamp]. dloss receives d loss / d logit.
inline double bce_from_logit(double z, double y, double* dloss = nullptr) {
  const double p = sigmoid(z);
  const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  if (dloss) *dloss = (p == pc) ? p - y : 0.0;
  return -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
}

struct ModelSpec {
  enum class Arch { Glm, Mlp };

  Arch arch = Arch::Glm;
  Index input_dim = 0;
  std::vector<Index> hidden;  // empty for Glm
  std::string activation = "tanh";

  static ModelSpec glm(Index d) { return {Arch::Glm, d, {}, "tanh"}; }
  static ModelSpec mlp(Index d, std::vector<Index> widths = {100, 100, 100}) {
    return {Arch::Mlp, d, std::move(widths), "tanh"};
  }

  void validate() const {
    if (input_dim <= 0) throw Error("model input_dim must be positive");
    if (arch == Arch::Glm && !hidden.empty()) throw Error("glm has no hidden layers");
    if (arch == Arch::Mlp && hidden.empty()) throw Error("mlp needs at least one hidden layer");
    for (Index w : hidden) {
      if (w <= 0) throw Error("hidden widths must be positive");
    }
    if (activation != "tanh") throw Error("unsupported activation '" + activation + "'");
  }

  // Layer sizes from input to the scalar output.
  [[nodiscard]] std::vector<Index> sizes() const {
    std::vector<Index> s{input_dim};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(1);
    return s;
  }

  [[nodiscard]] Index param_count() const {
    const auto s = sizes();
    Index n = 0;
    for (std::size_t l = 0; l + 1 < s.size(); ++l) n += s[l + 1] * s[l] + s[l + 1];
    return n;
  }
};

// What a weighted backward pass differentiates: the BCE loss or the raw logit.
enum class Target { Loss, Logit };

// Feed-forward classifier with a flat parameter vector. Each layer stores its
// weight matrix (column-major, out x in) followed by its bias. Inputs are
// batched as columns. A GLM is the single-layer case, with logit w^T v - b,
// so its stored bias is -b.
class Classifier {
 public:
  Classifier() = default;
  explicit Classifier(ModelSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    params_ = Vector::Zero(spec_.param_count());
  }
  Classifier(ModelSpec spec, Vector params) : Classifier(std::move(spec)) { set_params(std::move(params)); }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  static Classifier initialized(ModelSpec spec, std::uint64_t seed) {
    Classifier c(std::move(spec));
    Rng rng(seed);
    const auto s = c.spec_.sizes();
    Index off = 0;
    for (std::size_t l = 0; l + 1 < s.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(s[l]));
      std::uniform_real_distribution<double> u(-bound, bound);
      const Index count = s[l + 1] * s[l] + s[l + 1];
      for (Index k = 0; k < count; ++k) c.params_[off + k] = u(rng);
      off += count;
    }
    return c;
  }

  [[nodiscard]] const ModelSpec& spec() const { return spec_; }
  [[nodiscard]] const Vector& params() const { return params_; }
  [[nodiscard]] Index input_dim() const { return spec_.input_dim; }
  [[nodiscard]] bool is_glm() const { return spec_.arch == ModelSpec::Arch::Glm; }

  void set_params(Vector p) {
    if (p.size() != spec_.param_count()) {
      throw Error("parameter vector has " + std::to_string(p.size()) + " entries, model needs " +
                  std::to_string(spec_.param_count()));
    }
    params_ = std::move(p);
  }

  // GLM accessors (logit = w^T v - b).
  [[nodiscard]] Vector glm_weights() const {
    require_glm();
    return params_.head(spec_.input_dim);
  }
  [[nodiscard]] double glm_bias() const {
    require_glm();
    return -params_[spec_.input_dim];
  }

  [[nodiscard]] Vector logits(const Matrix& x) const {
    check_input(x.rows());
    const auto s = spec_.sizes();
    Matrix a = x;
    Index off = 0;
    for (std::size_t l = 0; l + 1 < s.size(); ++l) {
      const auto w = weight(off, s[l + 1], s[l]);
      const auto b = bias(off, s[l + 1], s[l]);
      Matrix z = w * a;
      z.colwise() += b;
      off += s[l + 1] * s[l] + s[l + 1];
      a = (l + 2 < s.size()) ? Matrix(z.array().tanh()) : z;
    }
    return a.row(0).transpose();
  }

  [[nodiscard]] double logit(const Vector& v) const { return logits(Matrix(v))[0]; }
  [[nodiscard]] double logit(const Instance& v) const { return logit(v.values()); }
  [[nodiscard]] double probability(const Instance& v) const { return sigmoid(logit(v)); }
  [[nodiscard]] int predict(const Instance& v) const { return logit(v) > 0.0 ? 1 : 0; }
  [[nodiscard]] double loss(const Instance& v, double y) const { return bce_from_logit(logit(v), y); }

  [[nodiscard]] std::vector<int> predict(const Matrix& x) const {
    const Vector z = logits(x);
    std::vector<int> out(static_cast<std::size_t>(z.size()));
    for (Index i = 0; i < z.size(); ++i) out[static_cast<std::size_t>(i)] = z[i] > 0.0 ? 1 : 0;
    return out;
  }

  // Returns sum_i coef_i * t_i where t_i is the per-column loss or logit.
  // grad_params (if given) receives sum_i coef_i * d t_i / d params;
  // grad_inputs (if given) receives column i = coef_i * d t_i / d x_i.
  double backward(const Matrix& x, const Vector& y, const Vector& coef, Target target, Vector* grad_params,
                  Matrix* grad_inputs, Vector* per_column = nullptr) const {
    check_input(x.rows());
    const Index m = x.cols();
    if (y.size() != m || coef.size() != m) throw Error("backward: batch size mismatch");
    const auto s = spec_.sizes();
    const std::size_t layers = s.size() - 1;

    std::vector<Matrix> acts;
    acts.reserve(layers + 1);
    acts.push_back(x);
    std::vector<Index> offsets(layers);
    Index off = 0;
    for (std::size_t l = 0; l < layers; ++l) {
      offsets[l] = off;
      Matrix z = weight(off, s[l + 1], s[l]) * acts.back();
      z.colwise() += bias(off, s[l + 1], s[l]);
      off += s[l + 1] * s[l] + s[l + 1];
      acts.push_back(l + 1 < layers ? Matrix(z.array().tanh()) : z);
    }

    const auto& out = acts.back();
    Matrix delta(1, m);
    double total = 0.0;
    if (per_column) per_column->resize(m);
    for (Index i = 0; i < m; ++i) {
      double t = out(0, i);
      double dt = 1.0;
      if (target == Target::Loss) t = bce_from_logit(out(0, i), y[i], &dt);
      if (per_column) (*per_column)[i] = t;
      total += coef[i] * t;
      delta(0, i) = coef[i] * dt;
    }
    if (!grad_params && !grad_inputs) return total;

    if (grad_params) grad_params->setZero(params_.size());
    for (std::size_t l = layers; l-- > 0;) {
      const Index o = offsets[l];
      const Index rows = s[l + 1];
      const Index cols = s[l];
      if (grad_params) {
        Eigen::Map<Matrix> gw(grad_params->data() + o, rows, cols);
        gw.noalias() = delta * acts[l].transpose();
        grad_params->segment(o + rows * cols, rows) = delta.rowwise().sum();
      }
      if (l == 0 && !grad_inputs) break;
      Matrix back = weight(o, rows, cols).transpose() * delta;
      if (l > 0) {
        delta = back.array() * (1.0 - acts[l].array().square());
      } else {
        *grad_inputs = std::move(back);
      }
    }
    return total;
  }

  // Gradient of the loss (or logit) with respect to a single input.
  [[nodiscard]] Vector input_gradient(const Vector& v, double y, Target target = Target::Loss) const {
    Matrix g;
    backward(Matrix(v), Vector::Constant(1, y), Vector::Ones(1), target, nullptr, &g);
    return g.col(0);
  }

 private:
  void require_glm() const {
    if (!is_glm()) throw Error("operation requires a glm");
  }
  void check_input(Index rows) const {
    if (rows != spec_.input_dim) {
      throw Error("dimension mismatch: model expects " + std::to_string(spec_.input_dim) + " features, got " +
                  std::to_string(rows));
    }
  }
  [[nodiscard]] Eigen::Map<const Matrix> weight(Index off, Index rows, Index cols) const {
    return {params_.data() + off, rows, cols};
  }
  [[nodiscard]] Eigen::Map<const Vector> bias(Index off, Index rows, Index cols) const {
    return {params_.data() + off + rows * cols, rows};
  }

  ModelSpec spec_;
  Vector params_;
};

inline Classifier make_glm(const Vector& w, double b) {
  Vector p(w.size() + 1);
  p.head(w.size()) = w;
  p[w.size()] = -b;
  return Classifier(ModelSpec::glm(w.size()), std::move(p));
}

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(Index n, AdamOptions o = {}) : opt_(o), m_(Vector::Zero(n)), v_(Vector::Zero(n)) {}

  void step(Vector& params, const Vector& grad) {
    ++t_;
    m_ = opt_.beta1 * m_ + (1.0 - opt_.beta1) * grad;
    v_ = opt_.beta2 * v_ + (1.0 - opt_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    params.array() -= opt_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + opt_.eps);
  }

 private:
  AdamOptions opt_;
  Vector m_;
  Vector v_;
  long t_ = 0;
};

}  // namespace capfair
