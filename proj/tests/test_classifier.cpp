#include "capfair/model/classifier.hpp"
#include "capfair/model/io.hpp"
#include "capfair/scm/builtin.hpp"
#include "capfair/train/pgd.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace capfair;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Central differences of the summed weighted loss with respect to parameters.
Vector fd_params(const Classifier& c, const Matrix& x, const Vector& y, const Vector& coef, Target t, double h) {
  Vector g(c.params().size());
  for (Index k = 0; k < g.size(); ++k) {
    Vector p = c.params();
    p[k] += h;
    const double up = Classifier(c.spec(), p).backward(x, y, coef, t, nullptr, nullptr);
    p[k] -= 2 * h;
    const double down = Classifier(c.spec(), p).backward(x, y, coef, t, nullptr, nullptr);
    g[k] = (up - down) / (2 * h);
  }
  return g;
}

Matrix fd_inputs(const Classifier& c, const Matrix& x, const Vector& y, const Vector& coef, Target t, double h) {
  Matrix g(x.rows(), x.cols());
  for (Index i = 0; i < x.cols(); ++i) {
    for (Index r = 0; r < x.rows(); ++r) {
      Matrix xp = x;
      xp(r, i) += h;
      const double up = c.backward(xp, y, coef, t, nullptr, nullptr);
      xp(r, i) -= 2 * h;
      const double down = c.backward(xp, y, coef, t, nullptr, nullptr);
      g(r, i) = (up - down) / (2 * h);
    }
  }
  return g;
}

}  // namespace

TEST(Classifier, GlmLogitWorkedExample) {
  const auto c = make_glm(vec({1.0, -2.0, 0.5}), 3.0);
  EXPECT_DOUBLE_EQ(c.logit(Instance{1.0, 1.0, -1.0}), -4.5);
  EXPECT_EQ(c.predict(Instance{1.0, 1.0, -1.0}), 0);
  EXPECT_DOUBLE_EQ(c.glm_bias(), 3.0);
  EXPECT_EQ(c.glm_weights(), vec({1.0, -2.0, 0.5}));
}

TEST(Classifier, ZeroWeightsGiveOneHalf) {
  const auto glm = make_glm(Vector::Zero(4), 0.0);
  EXPECT_DOUBLE_EQ(glm.probability(Instance{1.0, 2.0, 3.0, 4.0}), 0.5);
  Classifier mlp(ModelSpec::mlp(3, {5, 4}));
  EXPECT_DOUBLE_EQ(mlp.probability(Instance{0.3, -1.0, 2.0}), 0.5);
  // Random hidden layers but a zero output layer still give 0.5.
  auto init = Classifier::initialized(ModelSpec::mlp(3, {5, 4}), 1);
  Vector p = init.params();
  p.tail(4 + 1).setZero();
  init.set_params(p);
  EXPECT_DOUBLE_EQ(init.probability(Instance{0.3, -1.0, 2.0}), 0.5);
}

TEST(Classifier, BinaryCrossEntropyValues) {
  EXPECT_NEAR(bce_from_logit(0.0, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_from_logit(0.0, 0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_from_logit(std::log(0.1 / 0.9), 1.0), 2.302585, 1e-6);
  // Saturated logits hit the clamp and contribute no gradient.
  double d = 1.0;
  EXPECT_NEAR(bce_from_logit(-50.0, 1.0, &d), -std::log(kProbClamp), 1e-9);
  EXPECT_EQ(d, 0.0);
}

TEST(Classifier, GlmGradientClosedForm) {
  const auto c = make_glm(vec({0.4, -0.3}), 0.2);
  const Vector v = vec({1.5, 0.5});
  const double p = sigmoid(0.4 * 1.5 - 0.3 * 0.5 - 0.2);
  Vector g;
  c.backward(Matrix(v), Vector::Constant(1, 1.0), Vector::Ones(1), Target::Loss, &g, nullptr);
  EXPECT_NEAR(g[0], (p - 1.0) * 1.5, 1e-15);
  EXPECT_NEAR(g[1], (p - 1.0) * 0.5, 1e-15);
  EXPECT_NEAR(g[2], (p - 1.0), 1e-15);  // d/d(-b)
  EXPECT_TRUE(c.input_gradient(v, 1.0).isApprox((p - 1.0) * vec({0.4, -0.3}), 1e-14));
}

class GradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradientCheck, ParametersAndInputsMatchFiniteDifferences) {
  const int k = GetParam();
  const Index d = 2 + k % 4;
  const ModelSpec spec = k % 3 == 0 ? ModelSpec::glm(d) : ModelSpec::mlp(d, {static_cast<Index>(3 + k % 5), 4});
  const auto c = Classifier::initialized(spec, 100 + static_cast<std::uint64_t>(k));
  Rng rng(static_cast<std::uint64_t>(k));
  std::normal_distribution<double> g(0.0, 1.0);
  const Index m = 3;
  Matrix x(d, m);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  const Vector y = vec({1.0, 0.0, 1.0});
  const Vector coef = vec({1.0, -0.5, 2.0});
  for (Target t : {Target::Loss, Target::Logit}) {
    Vector gp;
    Matrix gx;
    c.backward(x, y, coef, t, &gp, &gx);
    const Vector fp = fd_params(c, x, y, coef, t, 1e-6);
    const Matrix fx = fd_inputs(c, x, y, coef, t, 1e-6);
    EXPECT_LE((gp - fp).cwiseAbs().maxCoeff(), 1e-5);
    EXPECT_LE((gx - fx).cwiseAbs().maxCoeff(), 1e-5);
  }
}

INSTANTIATE_TEST_SUITE_P(Configs, GradientCheck, ::testing::Range(0, 24));

TEST(SemiLatentGradient, ImfEqualsInputGradient) {
  const auto metric = FairMetric(builtin_scm("imf"), MetricConfig{});
  const auto space = PerturbationSpace::semi_latent(metric);
  const auto c = Classifier::initialized(ModelSpec::glm(3), 4);
  for (const auto& v : metric.scm().sample(10, 3)) {
    const Matrix a = space.anchor(v);
    const auto ev = evaluate(c, space, a, Vector::Ones(1), Matrix::Zero(space.dim(), 1), Target::Loss, true);
    const Vector gx = c.input_gradient(v.values(), 1.0);
    for (Index k = 0; k < space.dim(); ++k) {
      EXPECT_NEAR(ev.grad(k, 0), gx[metric.continuous()[static_cast<std::size_t>(k)]], 1e-14);
    }
  }
}

TEST(SemiLatentGradient, LinGlmClosedForm) {
  const auto metric = FairMetric(builtin_scm("lin"), MetricConfig{});
  const auto space = PerturbationSpace::semi_latent(metric);
  const Vector w = vec({0.7, 1.1, -0.6});
  const auto c = make_glm(w, 0.3);
  for (const auto& v : metric.scm().sample(10, 9)) {
    const Matrix a = space.anchor(v);
    const auto ev = evaluate(c, space, a, Vector::Zero(1), Matrix::Zero(space.dim(), 1), Target::Loss, true);
    const double p = c.probability(v);
    const Vector expected = p * metric.continuous_jacobian(metric.to_semi_latent(v)).transpose() * w;
    EXPECT_LE((ev.grad.col(0) - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SemiLatentGradient, NlmMlpMatchesFiniteDifferences) {
  const auto metric = FairMetric(builtin_scm("nlm"), MetricConfig{});
  const auto space = PerturbationSpace::semi_latent(metric);
  const auto c = Classifier::initialized(ModelSpec::mlp(3, {8, 8}), 21);
  for (const auto& v : metric.scm().sample(10, 2)) {
    const Matrix a = space.anchor(v);
    const Matrix zero = Matrix::Zero(space.dim(), 1);
    const auto ev = evaluate(c, space, a, Vector::Ones(1), zero, Target::Loss, true);
    for (Index k = 0; k < space.dim(); ++k) {
      Matrix e = zero;
      e(k, 0) = 1e-6;
      const double up = evaluate(c, space, a, Vector::Ones(1), e, Target::Loss, false).value[0];
      const double down = evaluate(c, space, a, Vector::Ones(1), -e, Target::Loss, false).value[0];
      EXPECT_NEAR(ev.grad(k, 0), (up - down) / 2e-6, 1e-5);
    }
  }
}

TEST(Classifier, StationaryPointOfBalancedData) {
  // The same point under both labels: zero weights are optimal.
  const auto c = make_glm(Vector::Zero(2), 0.0);
  Matrix x(2, 2);
  x << 1.0, 1.0, 2.0, 2.0;
  Vector g;
  c.backward(x, vec({1.0, 0.0}), Vector::Ones(2), Target::Loss, &g, nullptr);
  EXPECT_LE(g.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Classifier, JsonRoundTripIsExact) {
  for (const ModelSpec& spec : {ModelSpec::glm(3), ModelSpec::mlp(3)}) {
    const auto c = Classifier::initialized(spec, 5);
    const auto back = classifier_from_json(Json::parse(to_json(c).dump()));
    EXPECT_EQ(back.params(), c.params());
    EXPECT_EQ(back.spec().hidden, c.spec().hidden);
    EXPECT_EQ(back.is_glm(), c.is_glm());
  }
  EXPECT_THROW(classifier_from_json(Json::parse(R"({"architecture":"tree"})")), Error);
  EXPECT_THROW(classifier_from_json(Json::parse(R"({"architecture":"glm","input_dim":3,"params":[1]})")), Error);
}

TEST(Classifier, RejectsBadInputs) {
  const auto c = make_glm(Vector::Zero(3), 0.0);
  EXPECT_THROW((void)c.logit(Vector::Zero(2)), Error);
  EXPECT_THROW(ModelSpec::mlp(3, {0}).validate(), Error);
  ModelSpec relu = ModelSpec::mlp(3);
  relu.activation = "relu";
  EXPECT_THROW(relu.validate(), Error);
  EXPECT_THROW((void)Classifier(ModelSpec::mlp(3)).glm_weights(), Error);
}

TEST(Classifier, InitializationRangeAndDeterminism) {
  const auto a = Classifier::initialized(ModelSpec::mlp(4, {100, 100, 100}), 3);
  const auto b = Classifier::initialized(ModelSpec::mlp(4, {100, 100, 100}), 3);
  EXPECT_EQ(a.params(), b.params());
  EXPECT_EQ(a.params().size(), 4 * 100 + 100 + 2 * (100 * 100 + 100) + 100 + 1);
  EXPECT_LE(a.params().head(500).cwiseAbs().maxCoeff(), 0.5);
  EXPECT_LE(a.params().tail(101).cwiseAbs().maxCoeff(), 0.1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Vector p = vec({1.0, -1.0, 0.0});
  Adam opt(3);
  opt.step(p, vec({2.0, -0.5, 0.0}));
  EXPECT_NEAR(p[0], 1.0 - 1e-3, 1e-10);
  EXPECT_NEAR(p[1], -1.0 + 1e-3, 1e-10);
  EXPECT_EQ(p[2], 0.0);
}

TEST(Adam, MinimizesAQuadratic) {
  Vector p = vec({3.0, -2.0});
  Adam opt(2, {0.05, 0.9, 0.999, 1e-8});
  for (int t = 0; t < 2000; ++t) opt.step(p, 2.0 * p);
  EXPECT_LE(p.norm(), 1e-3);
}
