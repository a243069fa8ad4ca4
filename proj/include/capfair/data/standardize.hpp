#pragma once

#include "capfair/data/dataset.hpp"
#include "capfair/scm/scm.hpp"

#include <iostream>

namespace capfair {

// Zero mean, unit (population) variance on the given columns. Constant
// columns are left untouched and reported on stderr.
inline Standardization fit_standardization(const Dataset& d, const std::vector<int>& columns) {
  Standardization s;
  s.columns = columns;
  s.mean = Vector::Zero(static_cast<Index>(columns.size()));
  s.scale = Vector::Ones(static_cast<Index>(columns.size()));
  if (d.size() == 0) throw Error("standardize: empty dataset");
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const auto row = d.x.row(columns[k]);
    const double mean = row.mean();
    const double var = (row.array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) {
      const std::string name = d.names.empty() ? std::to_string(columns[k]) : d.names[static_cast<std::size_t>(columns[k])];
      std::cerr << "warning: feature '" << name << "' has zero variance; left unscaled\n";
      continue;
    }
    s.mean[static_cast<Index>(k)] = mean;
    s.scale[static_cast<Index>(k)] = sd;
  }
  return s;
}

inline Dataset apply_standardization(const Dataset& d, const Standardization& s) {
  Dataset out = d;
  for (std::size_t k = 0; k < s.columns.size(); ++k) {
    auto row = out.x.row(s.columns[k]);
    row = (row.array() - s.mean[static_cast<Index>(k)]) / s.scale[static_cast<Index>(k)];
  }
  if (d.standardization) {
    // Compose with the previous map: x_new = ((x - m0) / s0 - m1) / s1.
    Standardization total = *d.standardization;
    for (std::size_t k = 0; k < s.columns.size(); ++k) {
      const auto it = std::find(total.columns.begin(), total.columns.end(), s.columns[k]);
      if (it == total.columns.end()) {
        total.columns.push_back(s.columns[k]);
        total.mean.conservativeResize(total.mean.size() + 1);
        total.scale.conservativeResize(total.scale.size() + 1);
        total.mean[total.mean.size() - 1] = s.mean[static_cast<Index>(k)];
        total.scale[total.scale.size() - 1] = s.scale[static_cast<Index>(k)];
        continue;
      }
      const Index j = it - total.columns.begin();
      total.mean[j] += total.scale[j] * s.mean[static_cast<Index>(k)];
      total.scale[j] *= s.scale[static_cast<Index>(k)];
    }
    out.standardization = total;
  } else {
    out.standardization = s;
  }
  return out;
}

inline Dataset standardize(const Dataset& d, const std::vector<int>& columns) {
  return apply_standardization(d, fit_standardization(d, columns));
}

// Undoes every recorded standardization.
inline Dataset destandardize(const Dataset& d) {
  Dataset out = d;
  if (!d.standardization) return out;
  const auto& s = *d.standardization;
  for (std::size_t k = 0; k < s.columns.size(); ++k) {
    auto row = out.x.row(s.columns[k]);
    row = row.array() * s.scale[static_cast<Index>(k)] + s.mean[static_cast<Index>(k)];
  }
  out.standardization.reset();
  return out;
}

// SCM whose observed coordinates are the standardized ones. Mechanisms keep
// acting on raw values; exogenous coordinates are rescaled with the feature.
inline ScmSpec standardize_scm(const ScmSpec& scm, const Standardization& s) {
  std::vector<NodeSpec> nodes = scm.nodes();
  for (std::size_t k = 0; k < s.columns.size(); ++k) {
    auto& nd = nodes[static_cast<std::size_t>(s.columns[k])];
    if (nd.kind == NodeKind::Categorical) throw Error("cannot standardize categorical node '" + nd.name + "'");
    nd.offset += nd.scale * s.mean[static_cast<Index>(k)];
    nd.scale *= s.scale[static_cast<Index>(k)];
  }
  return ScmSpec(scm.name(), std::move(nodes), scm.sensitive());
}

}  // namespace capfair
