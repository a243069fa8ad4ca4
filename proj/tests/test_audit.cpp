#include "capfair/audit/band.hpp"
#include "capfair/audit/metrics.hpp"
#include "capfair/data/generate.hpp"

#include <gtest/gtest.h>

using namespace capfair;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Dataset sample_data(const ScmSpec& scm, std::size_t n, std::uint64_t seed) {
  return sample_labeled(scm, "logistic(X1 + X2)", n, seed);
}

FairMetric lin_metric() { return FairMetric(builtin_scm("lin"), MetricConfig{}); }

}  // namespace

TEST(Metrics, ConfusionExamples) {
  EXPECT_NEAR(mcc(Confusion{40, 45, 5, 10}), 1750.0 / std::sqrt(45.0 * 50 * 50 * 55), 1e-15);
  EXPECT_NEAR(mcc(Confusion{40, 45, 5, 10}), 0.7035, 1e-4);
  EXPECT_EQ(mcc(Confusion{25, 25, 25, 25}), 0.0);
  EXPECT_EQ(mcc(Confusion{10, 0, 5, 0}), 0.0);
  EXPECT_EQ(mcc(Confusion{7, 3, 0, 0}), 1.0);
  EXPECT_EQ(accuracy(Confusion{7, 3, 0, 0}), 1.0);
  EXPECT_THROW(accuracy(Confusion{}), Error);
  EXPECT_THROW(mcc(Confusion{}), Error);
  const auto c = confusion({1, 0, 1, 0}, vec({1, 1, 0, 0}));
  EXPECT_EQ(c.tp, 1);
  EXPECT_EQ(c.fn, 1);
  EXPECT_EQ(c.fp, 1);
  EXPECT_EQ(c.tn, 1);
}

TEST(Audit, ConstantClassifiersAreFair) {
  for (const std::string name : {"lin", "nlm"}) {
    const FairMetric metric(builtin_scm(name), MetricConfig{});
    const Dataset d = sample_data(metric.scm(), 300, 1);
    AuditOptions opt;
    opt.radii = {0.05, 0.5};
    for (const Classifier& c : {make_glm(Vector::Zero(3), 1.0), Classifier(ModelSpec::mlp(3, {8}))}) {
      const auto rep = audit(c, metric, d, opt);
      EXPECT_EQ(rep.cf, 0.0);
      for (const auto& [r, u] : rep.uai) EXPECT_EQ(u, 0.0) << r;
      for (const auto& [r, u] : rep.robustness) EXPECT_EQ(u, 0.0) << r;
      EXPECT_EQ(epsilon_delta_check(c, metric, d, 0.5, 0.5, opt), 0.0);
    }
  }
}

TEST(Audit, ReportInvariantsOnRandomModels) {
  for (const std::string name : {"lin", "nlm", "imf", "loan"}) {
    const Generated g = gen_dataset(name, 300, 3);
    const Standardization s = fit_standardization(g.data, g.scm.continuous_indices());
    const FairMetric metric(standardize_scm(g.scm, s), MetricConfig{});
    const Dataset d = apply_standardization(g.data, s);
    const Index dim = g.scm.size();
    for (const Classifier& c : {Classifier::initialized(ModelSpec::glm(dim), 2),
                                Classifier::initialized(ModelSpec::mlp(dim, {8, 8}), 2)}) {
      AuditOptions opt;
      opt.radii = {0.01, 0.05, 0.3};
      const auto rep = audit(c, metric, d, opt);
      EXPECT_EQ(rep.uai.at(0.0), rep.cf);
      double prev_u = rep.cf;
      for (double r : {0.01, 0.05, 0.3}) {
        EXPECT_LE(rep.cf, rep.uai.at(r)) << name;
        EXPECT_LE(rep.robustness.at(r), rep.uai.at(r)) << name;
        EXPECT_LE(prev_u, rep.uai.at(r)) << name;
        prev_u = rep.uai.at(r);
      }
      EXPECT_EQ(robustness_rate(c, metric, d, 0.0, opt), 0.0);
      EXPECT_EQ(uai(c, metric, d, 0.0, opt), cf_rate(c, metric.scm(), d));
      EXPECT_EQ(rep.samples, d.size());
      EXPECT_EQ(rep.method, c.is_glm() && metric.scm().is_linear() ? "closed-form" : "pgd");
    }
  }
}

TEST(Audit, EpsilonDeltaCheckMatchesUai) {
  const auto metric = lin_metric();
  const Dataset d = sample_data(metric.scm(), 400, 2);
  const auto c = make_glm(vec({0.0, 1.0, 1.0}), 0.5);
  AuditOptions opt;
  EXPECT_EQ(epsilon_delta_check(c, metric, d, 0.5, 0.05, opt), uai(c, metric, d, 0.05, opt));
  EXPECT_EQ(epsilon_delta_check(c, metric, d, 1.0, 0.05, opt), 0.0);
  EXPECT_THROW(epsilon_delta_check(c, metric, d, -0.1, 0.05, opt), Error);
}

TEST(Audit, ClosedFormAgreesWithSearch) {
  const auto metric = lin_metric();
  const Dataset d = sample_data(metric.scm(), 2000, 4);
  const auto c = make_glm(vec({0.3, 1.0, 0.6}), 0.4);
  AuditOptions exact;
  AuditOptions search;
  search.closed_form = false;
  for (double delta : {0.05, 0.3}) {
    for (bool factual : {false, true}) {
      Rng r1(1), r2(1);
      const auto a = search_flags(c, metric, d.x, delta, exact, r1, factual);
      const auto b = search_flags(c, metric, d.x, delta, search, r2, factual);
      int disagree = 0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_FALSE(b[i] && !a[i]) << i;  // search never beats the exact answer
        disagree += a[i] != b[i];
      }
      EXPECT_LE(disagree, 2);
    }
  }
}

TEST(Audit, LinearExampleNearBoundaryIsUnfair) {
  const auto metric = lin_metric();
  const auto c = make_glm(vec({0.0, 1.0, 1.0}), 5.0);
  // x1 + x2 = S + U2, so U2 = 4.5 puts v just below the boundary and its twin above it.
  const Instance v = metric.scm().push_forward(ExogenousPoint{0, 0.3, 4.5});
  EXPECT_EQ(c.predict(v), 0);
  AuditOptions opt;
  Rng rng(1);
  EXPECT_TRUE(is_capi_unfair(c, metric, v, 0.0, opt, rng));
  const Instance far = metric.scm().push_forward(ExogenousPoint{0, 0.3, 2.0});
  EXPECT_FALSE(is_capi_unfair(c, metric, far, 0.0, opt, rng));
  EXPECT_FALSE(is_capi_unfair(c, metric, far, 1.0, opt, rng));
  EXPECT_TRUE(is_capi_unfair(c, metric, far, 2.5, opt, rng));
  EXPECT_THROW(is_capi_unfair(c, metric, v, -1.0, opt, rng), Error);
}

TEST(Band, LinearExampleConstants) {
  const auto metric = lin_metric();
  const auto c = make_glm(vec({0.0, 1.0, 1.0}), 5.0);
  for (double delta : {0.0, 0.05, 0.3}) {
    const UnfairBand band(c, metric, delta);
    EXPECT_EQ(band.sensitive_column(), vec({1.0, 2.0, -1.0}));
    EXPECT_DOUBLE_EQ(band.twin_shift(), 1.0);
    EXPECT_NEAR(band.c1(), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(band.c2(), delta / std::sqrt(2.0), 1e-15);
    EXPECT_DOUBLE_EQ(band.continuous_sensitivity(), 1.0);
  }
}

TEST(Band, RejectsUnsupportedModels) {
  const auto metric = lin_metric();
  EXPECT_THROW(UnfairBand(Classifier(ModelSpec::mlp(3, {4})), metric, 0.1), Error);
  const FairMetric nlm(builtin_scm("nlm"), MetricConfig{});
  EXPECT_THROW(UnfairBand(make_glm(vec({0, 1, 1}), 0), nlm, 0.1), Error);
  EXPECT_THROW(UnfairBand(make_glm(vec({0, 1, 1}), 0), metric, -0.1), Error);
}

TEST(Band, OrthogonalWeightsRemoveCounterfactualUnfairness) {
  const auto metric = lin_metric();
  const auto c = make_glm(vec({0.0, 1.0, 2.0}), 0.3);  // w . (1, 2, -1) = 0
  const UnfairBand band(c, metric, 0.1);
  EXPECT_EQ(band.c1(), 0.0);
  const Dataset d = sample_data(metric.scm(), 10000, 9);
  EXPECT_EQ(cf_rate(c, metric.scm(), d), 0.0);
  for (Index i = 0; i < d.size(); ++i) EXPECT_FALSE(band.in_cf_area(d.instance(i)));
}

// Band membership against the direct check (twin flip or continuous flip).
TEST(Band, MembershipMatchesDirectCheckOnAGrid) {
  const auto metric = lin_metric();
  const auto& scm = metric.scm();
  for (double b : {5.0, 0.5}) {
    const auto c = make_glm(vec({0.0, 1.0, 1.0}), b);
    const double delta = 0.3;
    const UnfairBand band(c, metric, delta);
    AuditOptions opt;
    opt.closed_form = false;
    Rng rng(2);
    int agree = 0, total = 0, unfair = 0;
    for (int s = 0; s < 2; ++s) {
      for (int i = 0; i < 60; ++i) {
        for (int j = 0; j < 60; ++j) {
          const Instance v = scm.push_forward(ExogenousPoint{double(s), -2.0 + 0.07 * i, b - 1.9877 + 0.07 * j});
          const bool direct = is_capi_unfair(c, metric, v, delta, opt, rng);
          EXPECT_EQ(band.in_cf_area(v), cf_flags(c, scm, Matrix(v.values()))[0]);
          agree += direct == band.in_unfair_area(v);
          unfair += direct;
          ++total;
        }
      }
    }
    EXPECT_GE(static_cast<double>(agree) / total, 0.995) << b;
    EXPECT_GT(unfair, 100);
  }
}

TEST(Band, SideConditionHoldsOnTheCounterfactualArea) {
  const auto metric = lin_metric();
  const auto c = make_glm(vec({0.0, 1.0, 1.0}), 0.5);
  const UnfairBand band(c, metric, 0.0);
  const Dataset d = sample_data(metric.scm(), 5000, 3);
  int hits = 0;
  for (Index i = 0; i < d.size(); ++i) {
    const Instance v = d.instance(i);
    if (!band.in_cf_area(v)) continue;
    ++hits;
    EXPECT_TRUE(band.side_condition(v));
    EXPECT_LE(std::abs(band.boundary_distance(v)), band.c1() + 1e-12);
  }
  EXPECT_GT(hits, 100);
}

TEST(Mitigation, EmptySelectorLeavesTheClassifierUnchanged) {
  const auto metric = lin_metric();
  const auto c = make_glm(vec({0.0, 1.0, 1.0}), 0.5);
  const Dataset d = sample_data(metric.scm(), 2000, 1);
  const auto none = counterfactual_mitigate(c, metric.scm(), [](const Instance&) { return false; });
  EXPECT_EQ(none.predict(d.x), c.predict(d.x));
  const auto null_selector = counterfactual_mitigate(c, metric.scm(), nullptr);
  EXPECT_EQ(null_selector.predict(d.x), c.predict(d.x));
}

TEST(Mitigation, FullRegionRemovesCounterfactualUnfairnessInBothDirections) {
  const auto metric = lin_metric();
  const auto c = make_glm(vec({0.0, 1.0, 1.0}), 0.5);
  const Dataset est = sample_data(metric.scm(), 20000, 5);
  const Dataset meas = sample_data(metric.scm(), 20000, 6);
  ASSERT_GT(cf_rate(c, metric.scm(), meas), 0.1);
  double acc_pos = 0.0, acc_neg = 0.0;
  for (FlipDirection dir : {FlipDirection::ToPositive, FlipDirection::ToNegative}) {
    const auto m = counterfactual_mitigate(c, metric.scm(), select_all(), dir);
    const auto acc = mitigation_accounting(m, metric.scm(), est, meas);
    EXPECT_EQ(acc.cf_after, 0.0);
    EXPECT_LE(std::abs(acc.predicted - acc.cf_after), 2.0 * acc.standard_error + 1e-12);
    (dir == FlipDirection::ToPositive ? acc_pos : acc_neg) = acc.accuracy_after;
  }
  EXPECT_NE(acc_pos, acc_neg);
}

TEST(Mitigation, PartialRegionAccountingWithinTwoStandardErrors) {
  const auto metric = lin_metric();
  const auto c = make_glm(vec({0.0, 1.0, 1.0}), 0.5);
  const Dataset est = sample_data(metric.scm(), 50000, 7);
  const Dataset meas = sample_data(metric.scm(), 50000, 8);
  // Flip only the part of the region with X1 > 1.
  const auto m = counterfactual_mitigate(c, metric.scm(), [](const Instance& v) { return v[1] > 1.0; });
  const auto acc = mitigation_accounting(m, metric.scm(), est, meas);
  EXPECT_GT(acc.flip_mass, 0.01);
  EXPECT_LT(acc.cf_after, acc.cf_before);
  EXPECT_LE(std::abs(acc.predicted - acc.cf_after), 2.0 * acc.standard_error);
}

TEST(Mitigation, SelectorOutsideTheRegionIsRejected) {
  const auto metric = lin_metric();
  const auto c = make_glm(vec({0.0, 1.0, 1.0}), 0.5);
  const auto probe = metric.scm().sample(500, 3);
  EXPECT_THROW(counterfactual_mitigate(c, metric.scm(), [](const Instance&) { return true; },
                                       FlipDirection::ToPositive, probe),
               Error);
  const auto ok = counterfactual_mitigate(
      c, metric.scm(), [&](const Instance& v) { return c.predict(v) == 0 && cf_flags(c, metric.scm(), Matrix(v.values()))[0]; },
      FlipDirection::ToPositive, probe);
  EXPECT_EQ(ok.direction(), FlipDirection::ToPositive);
}
