#pragma once

#include "capfair/core/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace capfair {

// Per-feature affine map applied to continuous columns: x_std = (x - mean) / scale.
struct Standardization {
  std::vector<int> columns;
  Vector mean;
  Vector scale;
};

// Labeled samples stored column-wise (features x samples).
struct Dataset {
  Matrix x;
  Vector y;
  std::vector<std::string> names;
  std::optional<Standardization> standardization;
  std::string source;
  std::uint64_t seed = 0;

  [[nodiscard]] Index size() const { return x.cols(); }
  [[nodiscard]] Index dim() const { return x.rows(); }
  [[nodiscard]] Instance instance(Index i) const { return Instance(Vector(x.col(i))); }

  [[nodiscard]] Dataset subset(const std::vector<Index>& idx) const {
    Dataset d;
    d.x.resize(x.rows(), static_cast<Index>(idx.size()));
    d.y.resize(static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      d.x.col(static_cast<Index>(k)) = x.col(idx[k]);
      d.y[static_cast<Index>(k)] = y[idx[k]];
    }
    d.names = names;
    d.standardization = standardization;
    d.source = source;
    d.seed = seed;
    return d;
  }

  void validate() const {
    if (size() == 0) throw Error("dataset is empty");
    if (y.size() != size()) throw Error("dataset label count does not match sample count");
    for (Index i = 0; i < y.size(); ++i) {
      if (y[i] != 0.0 && y[i] != 1.0) throw Error("labels must be 0 or 1 (row " + std::to_string(i) + ")");
    }
    if (!names.empty() && static_cast<Index>(names.size()) != dim()) throw Error("feature name count mismatch");
  }
};

}  // namespace capfair
