#pragma once

#include "capfair/data/standardize.hpp"
#include "capfair/scm/builtin.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace capfair {

struct Generated {
  ScmSpec scm;
  Dataset data;
  std::string classifier;  // "glm" or "mlp"
};

// Samples features by ancestral sampling and labels Y ~ Bernoulli(rule(raw values)).
inline Dataset sample_labeled(const ScmSpec& scm, const std::string& label_rule, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error("gen: n must be >= 1");
  const auto& nodes = scm.nodes();
  const Expression rule = Expression::parse(label_rule, node_resolver(nodes));
  const auto samples = scm.sample(n, derive_seed(seed, 1));
  Rng label_rng(derive_seed(seed, 2));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Dataset d;
  d.x.resize(scm.size(), static_cast<Index>(n));
  d.y.resize(static_cast<Index>(n));
  d.names = scm.names();
  d.source = scm.name();
  d.seed = seed;
  std::vector<double> raw(nodes.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = samples[i];
    d.x.col(static_cast<Index>(i)) = v.values();
    for (std::size_t j = 0; j < nodes.size(); ++j) raw[j] = nodes[j].scale * v[static_cast<Index>(j)] + nodes[j].offset;
    const double p = rule.eval(raw);
    d.y[static_cast<Index>(i)] = unit(label_rng) < p ? 1.0 : 0.0;
  }
  return d;
}

// Raw-unit data and SCM for a built-in model.
inline Generated gen_dataset(const std::string& name, std::size_t n, std::uint64_t seed) {
  SyntheticModel m = builtin_model(name);
  Dataset d = sample_labeled(m.scm, m.label_rule, n, seed);
  return {std::move(m.scm), std::move(d), m.classifier};
}

// Standardizes continuous features on `fit_on` and returns the matching SCM.
struct StandardizedPair {
  ScmSpec scm;
  Dataset data;
};

inline StandardizedPair standardize_with_scm(const ScmSpec& scm, const Dataset& data) {
  const Standardization s = fit_standardization(data, scm.continuous_indices());
  return {standardize_scm(scm, s), apply_standardization(data, s)};
}

struct Split {
  Dataset train;
  Dataset test;
};

// Seeded disjoint split; `train_fraction` of the rows (rounded) go to train.
inline Split split_dataset(const Dataset& d, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw Error("split: train fraction must lie in (0, 1)");
  std::vector<Index> idx(static_cast<std::size_t>(d.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
  if (cut == 0 || cut == idx.size()) throw Error("split: both parts must be nonempty");
  std::vector<Index> a(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut));
  std::vector<Index> b(idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {d.subset(a), d.subset(b)};
}

}  // namespace capfair
