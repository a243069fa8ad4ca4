#include "capfair/data/generate.hpp"
#include "capfair/data/standardize.hpp"
#include "capfair/train/trainer.hpp"

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

struct Fixture {
  ScmSpec scm;
  Dataset data;
};

Fixture standardized(const std::string& name, std::size_t n, std::uint64_t seed) {
  const Generated g = gen_dataset(name, n, seed);
  const Standardization s = fit_standardization(g.data, g.scm.continuous_indices());
  return {standardize_scm(g.scm, s), apply_standardization(g.data, s)};
}

double accuracy_of(const Classifier& c, const Dataset& d) {
  const auto pred = c.predict(d.x);
  int hits = 0;
  for (Index i = 0; i < d.size(); ++i) hits += pred[static_cast<std::size_t>(i)] == static_cast<int>(d.y[i]);
  return static_cast<double>(hits) / static_cast<double>(d.size());
}

PgdOptions pgd(int steps = 10, int restarts = 1) { return {steps, 0.0, restarts, NormP::L2}; }

}  // namespace

TEST(Erm, SeparatesSeparableData) {
  const auto f = standardized("lin", 600, 1);
  Dataset d = f.data;
  for (Index i = 0; i < d.size(); ++i) d.y[i] = d.x(1, i) + d.x(2, i) > 0.0 ? 1.0 : 0.0;
  TrainConfig cfg;
  cfg.lr = 0.1;
  cfg.epochs = 200;
  cfg.seed = 4;
  const FairMetric metric(f.scm, MetricConfig{});
  const auto tm = train(d, metric, ModelSpec::glm(3), cfg);
  EXPECT_GE(accuracy_of(tm.model, d), 0.99);
  EXPECT_LT(tm.loss_trace.back(), tm.loss_trace.front());
}

TEST(Degeneration, ZeroWeightRegularizersReproduceErmBitwise) {
  const auto f = standardized("nlm", 300, 2);
  const FairMetric metric(f.scm, MetricConfig{});
  for (const ModelSpec& spec : {ModelSpec::glm(3), ModelSpec::mlp(3, {16, 16})}) {
    TrainConfig base;
    base.epochs = 3;
    base.batch_size = 50;
    base.seed = 11;
    const auto erm = train(f.data, metric, spec, base, {true});

    TrainConfig capify = base;
    capify.kind = TrainerKind::Capify;
    capify.mu1 = capify.mu2 = capify.mu3 = 0.0;
    TrainConfig al = base;
    al.kind = TrainerKind::Al;
    al.delta = 0.0;
    TrainConfig ross = base;
    ross.kind = TrainerKind::Ross;
    ross.mu1 = 0.0;
    TrainConfig llr = base;
    llr.kind = TrainerKind::Llr;
    llr.mu1 = llr.mu2 = 0.0;
    for (const auto& cfg : {capify, al, ross, llr}) {
      const auto other = train(f.data, metric, spec, cfg, {true});
      ASSERT_EQ(other.param_trace.size(), erm.param_trace.size());
      for (std::size_t k = 0; k < erm.param_trace.size(); ++k) {
        ASSERT_EQ(other.param_trace[k], erm.param_trace[k]) << to_string(cfg.kind) << " step " << k;
      }
    }
  }
}

TEST(InnerMaxPlain, ZeroRadiusReturnsTheInput) {
  const auto c = make_glm(vec({0.3, 1.0, -2.0}), 0.1);
  Rng rng(1);
  const Instance v{1.0, 0.4, -0.2};
  EXPECT_EQ(inner_max_plain(c, {1, 2}, v, 1.0, 0.0, pgd(), rng), v);
}

TEST(InnerMaxPlain, GlmMatchesClosedForm) {
  const Vector w = vec({0.3, 1.0, -2.0});
  const auto c = make_glm(w, 0.1);
  Rng rng(2);
  const Instance v{1.0, 0.4, -0.2};
  double previous = -1.0;
  for (double delta : {0.0, 0.01, 0.05, 0.2, 0.5}) {
    for (double y : {0.0, 1.0}) {
      const Instance x = inner_max_plain(c, {1, 2}, v, y, delta, pgd(), rng);
      const double z = c.logit(v) + (y == 1.0 ? -1.0 : 1.0) * delta * std::hypot(1.0, 2.0);
      EXPECT_NEAR(c.loss(x, y), bce_from_logit(z, y), 1e-9) << delta;
      EXPECT_EQ(x[0], v[0]);
      EXPECT_LE((x.values() - v.values()).norm(), delta + 1e-12);
    }
    const double loss = c.loss(inner_max_plain(c, {1, 2}, v, 1.0, delta, pgd(), rng), 1.0);
    EXPECT_GE(loss, previous);
    previous = loss;
  }
}

TEST(InnerMaxCap, ZeroRadiusFindsTheWorstTwin) {
  const FairMetric metric(builtin_scm("lin"), MetricConfig{});
  const auto c = make_glm(vec({1.0, 0.5, 0.25}), 0.0);
  Rng rng(3);
  for (const auto& v : metric.scm().sample(20, 5)) {
    const auto r = inner_max_cap(c, metric, v, 1.0, 0.0, pgd(), rng);
    double worst = -1.0;
    for (const auto& t : metric.scm().twins(v)) worst = std::max(worst, c.loss(t, 1.0));
    EXPECT_DOUBLE_EQ(r.loss, worst);
  }
}

TEST(InnerMaxCap, LinGlmMatchesClosedForm) {
  const FairMetric metric(builtin_scm("lin"), MetricConfig{});
  const Vector w = vec({0.8, -0.4, 1.2});
  const auto c = make_glm(w, 0.2);
  // J_cont^T w for the linear model: (w1 - w2, w2).
  const double k = std::hypot(w[1] - w[2], w[2]);
  Rng rng(4);
  for (const auto& v : metric.scm().sample(30, 6)) {
    for (double delta : {0.05, 0.3}) {
      const auto r = inner_max_cap(c, metric, v, 1.0, delta, pgd(), rng);
      double bound = -1.0;
      for (const auto& t : metric.scm().twins(v)) bound = std::max(bound, bce_from_logit(c.logit(t) - delta * k, 1.0));
      EXPECT_NEAR(r.loss, bound, 1e-4);
    }
  }
}

TEST(InnerMaxCap, ResultsAreAdmissible) {
  for (const std::string name : {"nlm", "loan"}) {
    const auto f = standardized(name, 50, 8);
    MetricConfig mc;
    mc.sensitive = {Pseudometric::discrete()};
    for (const auto& pm : {Pseudometric::trivial(), Pseudometric::discrete()}) {
      mc.sensitive = {pm};
      const FairMetric metric(f.scm, mc);
      const auto c = Classifier::initialized(ModelSpec::mlp(f.scm.size(), {8, 8}), 3);
      Rng rng(9);
      for (Index i = 0; i < 20; ++i) {
        const Instance v = f.data.instance(i);
        const auto r = inner_max_cap(c, metric, v, f.data.y[i], 0.1, pgd(), rng);
        EXPECT_TRUE(metric.contains(CapBall(v, 0.1), r.point)) << name;
        EXPECT_GE(r.loss, c.loss(v, f.data.y[i]) - 1e-12);
      }
    }
  }
}

TEST(Capify, RegularizerVanishesWithZeroWeights) {
  const FairMetric metric(builtin_scm("nlm"), MetricConfig{});
  const auto c = Classifier::initialized(ModelSpec::mlp(3, {8}), 1);
  Rng rng(1);
  for (const auto& v : metric.scm().sample(10, 1)) {
    EXPECT_EQ(capify_regularizer(c, metric, v, 1.0, 0.05, {0.0, 0.0, 0.0, 1e-3}, pgd(), rng), 0.0);
  }
}

TEST(Capify, GammaOfLinearLogitIsZero) {
  const FairMetric metric(builtin_scm("imf"), MetricConfig{});
  const auto c = make_glm(vec({0.5, -1.0, 2.0}), 0.3);
  Rng rng(2);
  for (const auto& v : metric.scm().sample(10, 3)) {
    EXPECT_NEAR(gamma_estimate(c, metric, v, 1.0, 0.5, pgd(), rng, Target::Logit), 0.0, 1e-12);
    EXPECT_GT(gamma_estimate(c, metric, v, 1.0, 0.5, pgd(), rng, Target::Loss), 0.0);
  }
}

TEST(Capify, TwinTermEqualsLossWhenClassifierIgnoresTheTwinShift) {
  const FairMetric metric(builtin_scm("lin"), MetricConfig{});
  // Twin shift in lin is (1, 2, -1); w is orthogonal to it.
  const auto c = make_glm(vec({0.0, 1.0, 2.0}), 0.4);
  Rng rng(3);
  for (const auto& v : metric.scm().sample(20, 4)) {
    for (double y : {0.0, 1.0}) {
      const double twin = capify_regularizer(c, metric, v, y, 0.05, {1.0, 0.0, 0.0, 1e-3}, pgd(), rng);
      EXPECT_NEAR(twin, c.loss(v, y), 1e-12);
    }
  }
}

TEST(Capify, GradientNormTermClosedForm) {
  const FairMetric metric(builtin_scm("lin"), MetricConfig{});
  const Vector w = vec({0.8, -0.4, 1.2});
  const auto c = make_glm(w, 0.2);
  Rng rng(5);
  const double k = std::hypot(w[1] - w[2], w[2]);
  for (const auto& v : metric.scm().sample(10, 7)) {
    const double p = c.probability(v);
    const double value = capify_regularizer(c, metric, v, 1.0, 0.05, {0.0, 0.0, 1.0, 1e-3}, pgd(), rng);
    EXPECT_NEAR(value, 0.05 * (1.0 - p) * k, 1e-12);
  }
}

// The finite-difference rows carry the parameter gradient of the
// gradient-norm term.
TEST(Capify, SurrogateRowsGiveTheRegularizerGradient) {
  const auto f = standardized("nlm", 20, 3);
  const FairMetric metric(f.scm, MetricConfig{});
  const auto c = Classifier::initialized(ModelSpec::mlp(3, {6}), 8);
  const CapifyWeights w{0.0, 0.0, 1.0, 1e-4};
  const Matrix v = f.data.x;
  const Vector y = f.data.y;
  Rng rng(1);
  ObjectiveRows rows;
  capify_rows(c, metric, v, y, 0.5, w, pgd(), rng, rows);
  Vector g;
  c.backward(rows.inputs(), rows.labels(), rows.coefficients(), Target::Loss, &g, nullptr);

  auto reg = [&](const Vector& p) {
    Classifier cp(c.spec(), p);
    ObjectiveRows unused;
    return capify_rows(cp, metric, v, y, 0.5, w, pgd(), rng, unused).sum();
  };
  for (Index k = 0; k < g.size(); ++k) {
    Vector p = c.params();
    p[k] += 1e-6;
    const double up = reg(p);
    p[k] -= 2e-6;
    const double down = reg(p);
    EXPECT_NEAR(g[k], (up - down) / 2e-6, 1e-3 * std::max(1.0, std::abs(g[k]))) << k;
  }
}

TEST(Gamma, PoolCandidatesBoundTheEstimate) {
  const FairMetric metric(builtin_scm("nlm"), MetricConfig{});
  const auto space = PerturbationSpace::semi_latent(metric);
  const auto c = Classifier::initialized(ModelSpec::mlp(3, {8, 8}), 12);
  Rng rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  for (const auto& v : metric.scm().sample(10, 8)) {
    const Matrix a = space.anchor(v);
    std::vector<Vector> pool;
    for (int j = 0; j < 4; ++j) pool.push_back(sample_ball(2, 0.3, NormP::L2, rng));
    const double gamma = gamma_estimate(c, metric, v, 1.0, 0.3, pgd(0, 0), rng, Target::Loss, pool);
    const Vector ones = Vector::Ones(1);
    const auto base = evaluate(c, space, a, ones, Matrix::Zero(2, 1), Target::Loss, true);
    for (const auto& d : pool) {
      const double f = evaluate(c, space, a, ones, Matrix(d), Target::Loss, false).value[0];
      const double r = std::abs(f - base.value[0] - d.dot(base.grad.col(0)));
      EXPECT_GE(gamma, r - 1e-15);
    }
  }
}

TEST(Train, DeterministicForAFixedSeed) {
  const auto f = standardized("lin", 200, 5);
  const FairMetric metric(f.scm, MetricConfig{});
  for (TrainerKind kind : all_trainers()) {
    TrainConfig cfg;
    cfg.kind = kind;
    cfg.epochs = 2;
    cfg.seed = 42;
    const auto a = train(f.data, metric, ModelSpec::glm(3), cfg);
    const auto b = train(f.data, metric, ModelSpec::glm(3), cfg);
    EXPECT_EQ(a.model.params(), b.model.params()) << to_string(kind);
    cfg.seed = 43;
    const auto c = train(f.data, metric, ModelSpec::glm(3), cfg);
    EXPECT_NE(a.model.params(), c.model.params()) << to_string(kind);
    for (double l : a.loss_trace) EXPECT_TRUE(std::isfinite(l));
  }
}

TEST(Train, AbortsOnNonFiniteObjective) {
  auto f = standardized("lin", 50, 6);
  f.data.x(1, 7) = std::numeric_limits<double>::quiet_NaN();
  const FairMetric metric(f.scm, MetricConfig{});
  TrainConfig cfg;
  cfg.epochs = 1;
  try {
    train(f.data, metric, ModelSpec::glm(3), cfg);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
  }
}

TEST(Train, RejectsInvalidConfigs) {
  const auto f = standardized("lin", 50, 6);
  const FairMetric metric(f.scm, MetricConfig{});
  TrainConfig cfg;
  cfg.delta = -1.0;
  EXPECT_THROW(train(f.data, metric, ModelSpec::glm(3), cfg), Error);
  cfg = {};
  cfg.lr = 0.0;
  EXPECT_THROW(train(f.data, metric, ModelSpec::glm(3), cfg), Error);
  EXPECT_THROW(train(f.data, metric, ModelSpec::glm(4), TrainConfig{}), Error);
  EXPECT_THROW(parse_trainer("sgd"), Error);
  EXPECT_EQ(parse_trainer("capify"), TrainerKind::Capify);
}
