#pragma once

// Counterfactual unfairness, CAPI unfairness and non-robustness audits.
//
// A point is CAPI-unfair at radius delta when some w in its CAP ball gets a
// different hard label. The search enumerates Theta_delta exactly and handles
// the continuous part either in closed form (GLM on a linear SCM, where the
// logit is affine in the semi-latent coordinates) or by PGD on the logit.
// PGD results are lower bounds: "false" means no violation was found.

#include "capfair/audit/metrics.hpp"
#include "capfair/train/objectives.hpp"

#include <map>
#include <vector>

namespace capfair {

struct AuditOptions {
  int pgd_steps = 20;
  int restarts = 3;
  std::vector<double> radii{0.05, 0.01};
  std::uint64_t seed = 0;
  bool closed_form = true;  // use the exact check when it applies
  Index chunk = 256;

  [[nodiscard]] PgdOptions pgd(NormP p) const { return {pgd_steps, 0.0, restarts, p}; }
};

// 1 where any counterfactual twin receives a different label than v.
template <typename Predictor>
std::vector<bool> cf_flags(const Predictor& model, const ScmSpec& scm, const Matrix& x) {
  std::vector<bool> out(static_cast<std::size_t>(x.cols()), false);
  const auto own = model.predict(x);
  std::vector<Vector> twins;
  std::vector<Index> owner;
  for (Index i = 0; i < x.cols(); ++i) {
    for (auto& t : scm.twins(Instance(Vector(x.col(i))))) {
      twins.push_back(t.values());
      owner.push_back(i);
    }
  }
  Matrix tx(x.rows(), static_cast<Index>(twins.size()));
  for (Index c = 0; c < tx.cols(); ++c) tx.col(c) = twins[static_cast<std::size_t>(c)];
  const auto labels = model.predict(tx);
  for (std::size_t c = 0; c < labels.size(); ++c) {
    const auto i = static_cast<std::size_t>(owner[c]);
    if (labels[c] != own[i]) out[i] = true;
  }
  return out;
}

template <typename Predictor>
double cf_rate(const Predictor& model, const ScmSpec& scm, const Dataset& data) {
  if (data.size() == 0) throw Error("cf_rate: empty dataset");
  const auto f = cf_flags(model, scm, data.x);
  return static_cast<double>(std::count(f.begin(), f.end(), true)) / static_cast<double>(f.size());
}

inline bool closed_form_applies(const Classifier& model, const FairMetric& metric) {
  return model.is_glm() && metric.scm().is_linear();
}

// Flags points with a label change inside the CAP of radius delta (or only in
// the factual continuous ball when only_factual is set).
inline std::vector<bool> search_flags(const Classifier& model, const FairMetric& metric, const Matrix& x, double delta,
                                      const AuditOptions& opt, Rng& rng, bool only_factual) {
  const Index m = x.cols();
  std::vector<bool> out(static_cast<std::size_t>(m), false);
  const auto own = model.predict(x);
  const auto& cat = metric.categorical();
  const bool exact = opt.closed_form && closed_form_applies(model, metric);
  Vector w;
  if (exact) w = model.glm_weights();

  for (Index start = 0; start < m; start += opt.chunk) {
    const Index b = std::min(opt.chunk, m - start);
    const Matrix v = x.middleCols(start, b);
    if (exact) {
      for (Index i = 0; i < b; ++i) {
        const Instance vi(Vector(v.col(i)));
        const int h = own[static_cast<std::size_t>(start + i)];
        const SemiLatentPoint q = metric.to_semi_latent(vi);
        std::vector<std::vector<double>> thetas;
        if (only_factual) {
          std::vector<double> f;
          for (int c : cat) f.push_back(vi[c]);
          thetas.push_back(std::move(f));
        } else {
          thetas = metric.theta_set(vi, delta);
        }
        for (const auto& theta : thetas) {
          SemiLatentPoint qt = q;
          for (std::size_t k = 0; k < cat.size(); ++k) qt[cat[k]] = theta[k];
          const double z = model.logit(metric.from_semi_latent(qt));
          const double r = only_factual ? delta : metric.continuous_radius(theta, vi, delta);
          const double reach = r * dual_norm(Vector(metric.continuous_jacobian(qt).transpose() * w), metric.config().p);
          if ((h == 1 && z - reach <= 0.0) || (h == 0 && z + reach > 0.0)) {
            out[static_cast<std::size_t>(start + i)] = true;
            break;
          }
        }
      }
      continue;
    }
    Vector signs(b);
    for (Index i = 0; i < b; ++i) signs[i] = own[static_cast<std::size_t>(start + i)] == 1 ? -1.0 : 1.0;
    const auto found = cap_search(model, metric, v, Vector::Zero(b), delta, signs, Target::Logit,
                                  opt.pgd(metric.config().p), rng, only_factual);
    for (Index i = 0; i < b; ++i) {
      const bool positive = own[static_cast<std::size_t>(start + i)] == 1;
      out[static_cast<std::size_t>(start + i)] = positive ? found.value[i] >= 0.0 : found.value[i] > 0.0;
    }
  }
  return out;
}

inline bool is_capi_unfair(const Classifier& model, const FairMetric& metric, const Instance& v, double delta,
                           const AuditOptions& opt, Rng& rng) {
  if (!(delta >= 0.0)) throw Error("is_capi_unfair: radius must be >= 0");
  const Matrix x = v.values();
  if (cf_flags(model, metric.scm(), x)[0]) return true;
  return search_flags(model, metric, x, delta, opt, rng, false)[0];
}

inline double flag_rate(const std::vector<bool>& f) {
  if (f.empty()) throw Error("empty dataset");
  return static_cast<double>(std::count(f.begin(), f.end(), true)) / static_cast<double>(f.size());
}

inline std::vector<bool> or_flags(std::vector<bool> a, const std::vector<bool>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = a[i] || b[i];
  return a;
}

inline double uai(const Classifier& model, const FairMetric& metric, const Dataset& data, double delta,
                  const AuditOptions& opt = {}) {
  if (!(delta >= 0.0)) throw Error("uai: radius must be >= 0");
  Rng rng(derive_seed(opt.seed, 11));
  auto flags = cf_flags(model, metric.scm(), data.x);
  if (delta > 0.0) flags = or_flags(flags, search_flags(model, metric, data.x, delta, opt, rng, false));
  return flag_rate(flags);
}

inline double robustness_rate(const Classifier& model, const FairMetric& metric, const Dataset& data, double delta,
                              const AuditOptions& opt = {}) {
  if (!(delta >= 0.0)) throw Error("robustness_rate: radius must be >= 0");
  if (data.size() == 0) throw Error("robustness_rate: empty dataset");
  if (delta == 0.0) return 0.0;
  Rng rng(derive_seed(opt.seed, 12));
  return flag_rate(search_flags(model, metric, data.x, delta, opt, rng, true));
}

// Fraction of points with some w, d_fair(v, w) <= delta, whose output differs
// by more than epsilon under the discrete output metric.
inline double epsilon_delta_check(const Classifier& model, const FairMetric& metric, const Dataset& data,
                                  double epsilon, double delta, const AuditOptions& opt = {}) {
  if (!(epsilon >= 0.0) || !(delta >= 0.0)) throw Error("epsilon_delta_check: epsilon and delta must be >= 0");
  if (data.size() == 0) throw Error("epsilon_delta_check: empty dataset");
  if (epsilon >= 1.0) return 0.0;
  return uai(model, metric, data, delta, opt);
}

struct AuditFlags {
  std::vector<bool> cf;
  std::map<double, std::vector<bool>> unfair;
  std::map<double, std::vector<bool>> nonrobust;
};

struct AuditReport {
  double accuracy = 0.0;
  double mcc = 0.0;
  double cf = 0.0;
  std::map<double, double> uai;
  std::map<double, double> robustness;
  Index samples = 0;
  int pgd_steps = 0;
  int restarts = 0;
  std::string method;
};

// Radii are processed in increasing order; a violation at a smaller radius is
// also one at every larger radius, and counterfactual or continuous
// violations are violations of the CAP, so flags are carried forward.
inline AuditReport audit(const Classifier& model, const FairMetric& metric, const Dataset& data,
                         const AuditOptions& opt = {}, AuditFlags* flags_out = nullptr) {
  data.validate();
  AuditReport rep;
  const Confusion conf = confusion(model.predict(data.x), data.y);
  rep.accuracy = accuracy(conf);
  rep.mcc = mcc(conf);
  rep.samples = data.size();
  rep.pgd_steps = opt.pgd_steps;
  rep.restarts = opt.restarts;
  rep.method = opt.closed_form && closed_form_applies(model, metric) ? "closed-form" : "pgd";

  AuditFlags flags;
  flags.cf = cf_flags(model, metric.scm(), data.x);
  rep.cf = flag_rate(flags.cf);
  rep.uai[0.0] = rep.cf;

  std::vector<double> radii;
  for (double r : opt.radii) {
    if (!(r >= 0.0)) throw Error("audit radii must be >= 0");
    if (r > 0.0) radii.push_back(r);
  }
  std::sort(radii.begin(), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());

  std::vector<bool> prev_r(flags.cf.size(), false);
  std::vector<bool> prev_u = flags.cf;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    Rng rng(derive_seed(opt.seed, 100 + k));
    prev_r = or_flags(prev_r, search_flags(model, metric, data.x, radii[k], opt, rng, true));
    prev_u = or_flags(or_flags(prev_u, prev_r), search_flags(model, metric, data.x, radii[k], opt, rng, false));
    flags.nonrobust[radii[k]] = prev_r;
    flags.unfair[radii[k]] = prev_u;
    rep.robustness[radii[k]] = flag_rate(prev_r);
    rep.uai[radii[k]] = flag_rate(prev_u);
  }
  if (flags_out) *flags_out = std::move(flags);
  return rep;
}

}  // namespace capfair
