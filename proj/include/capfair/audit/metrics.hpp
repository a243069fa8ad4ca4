#pragma once

#include "capfair/data/dataset.hpp"

#include <cmath>
#include <vector>

namespace capfair {

struct Confusion {
  long tp = 0;
  long tn = 0;
  long fp = 0;
  long fn = 0;

  [[nodiscard]] long total() const { return tp + tn + fp + fn; }
};

inline Confusion confusion(const std::vector<int>& predicted, const Vector& y) {
  Confusion c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool truth = y[static_cast<Index>(i)] == 1.0;
    if (predicted[i] == 1) {
      (truth ? c.tp : c.fp)++;
    } else {
      (truth ? c.fn : c.tn)++;
    }
  }
  return c;
}

inline double accuracy(const Confusion& c) {
  if (c.total() == 0) throw Error("accuracy: empty dataset");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

// Matthews correlation coefficient; 0 when any marginal is empty.
inline double mcc(const Confusion& c) {
  if (c.total() == 0) throw Error("mcc: empty dataset");
  const double tp = static_cast<double>(c.tp);
  const double tn = static_cast<double>(c.tn);
  const double fp = static_cast<double>(c.fp);
  const double fn = static_cast<double>(c.fn);
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (den == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(den);
}

template <typename Predictor>
double accuracy(const Predictor& model, const Dataset& data) {
  if (data.size() == 0) throw Error("accuracy: empty dataset");
  return accuracy(confusion(model.predict(data.x), data.y));
}

template <typename Predictor>
double mcc(const Predictor& model, const Dataset& data) {
  if (data.size() == 0) throw Error("mcc: empty dataset");
  return mcc(confusion(model.predict(data.x), data.y));
}

}  // namespace capfair
