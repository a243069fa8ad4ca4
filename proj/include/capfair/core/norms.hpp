#pragma once

#include "capfair/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace capfair {

enum class NormP { L1, L2, Linf };

inline NormP conjugate(NormP p) {
  switch (p) {
    case NormP::L1: return NormP::Linf;
    case NormP::Linf: return NormP::L1;
    default: return NormP::L2;
  }
}

inline std::string to_string(NormP p) {
  switch (p) {
    case NormP::L1: return "1";
    case NormP::Linf: return "inf";
    default: return "2";
  }
}

inline NormP parse_norm(const std::string& s) {
  if (s == "1" || s == "l1") return NormP::L1;
  if (s == "2" || s == "l2") return NormP::L2;
  if (s == "inf" || s == "linf" || s == "Inf") return NormP::Linf;
  throw Error("unknown norm '" + s + "' (expected 1, 2 or inf)");
}

template <typename Derived>
double norm(const Eigen::MatrixBase<Derived>& x, NormP p) {
  if (x.size() == 0) return 0.0;
  switch (p) {
    case NormP::L1: return x.template lpNorm<1>();
    case NormP::Linf: return x.template lpNorm<Eigen::Infinity>();
    default: return x.norm();
  }
}

template <typename Derived>
double dual_norm(const Eigen::MatrixBase<Derived>& x, NormP p) {
  return norm(x, conjugate(p));
}

// Unit vector d (in the p-norm) maximising d^T g, so d^T g = ||g||_*.
inline Vector dual_direction(const Vector& g, NormP p) {
  Vector d = Vector::Zero(g.size());
  if (g.size() == 0) return d;
  switch (p) {
    case NormP::L2: {
      const double n = g.norm();
      if (n > 0.0) d = g / n;
      break;
    }
    case NormP::Linf:
      for (Index i = 0; i < g.size(); ++i) d[i] = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
      break;
    case NormP::L1: {
      Index k = 0;
      g.cwiseAbs().maxCoeff(&k);
      if (g[k] != 0.0) d[k] = g[k] > 0.0 ? 1.0 : -1.0;
      break;
    }
  }
  return d;
}

// Euclidean projection onto the l1 ball (Duchi et al. sort-based method).
inline Vector project_l1(const Vector& x, double radius) {
  if (x.lpNorm<1>() <= radius) return x;
  if (radius <= 0.0) return Vector::Zero(x.size());
  std::vector<double> mu(x.data(), x.data() + x.size());
  for (auto& m : mu) m = std::abs(m);
  std::sort(mu.begin(), mu.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    cumulative += mu[j];
    const double t = (cumulative - radius) / static_cast<double>(j + 1);
    if (mu[j] - t > 0.0) theta = t;
  }
  Vector out(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double m = std::max(std::abs(x[i]) - theta, 0.0);
    out[i] = x[i] >= 0.0 ? m : -m;
  }
  return out;
}

inline Vector project_ball(const Vector& x, double radius, NormP p) {
  switch (p) {
    case NormP::L2: {
      const double n = x.norm();
      return n > radius ? Vector(x * (radius / n)) : x;
    }
    case NormP::Linf: return x.cwiseMax(-radius).cwiseMin(radius);
    default: return project_l1(x, radius);
  }
}

// Uniform sample from the closed p-ball of the given radius in R^k.
inline Vector sample_ball(Index k, double radius, NormP p, Rng& rng) {
  Vector out(k);
  if (k == 0) return out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  switch (p) {
    case NormP::Linf:
      for (Index i = 0; i < k; ++i) out[i] = radius * (2.0 * unit(rng) - 1.0);
      return out;
    case NormP::L2: {
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (Index i = 0; i < k; ++i) out[i] = gauss(rng);
      double n = out.norm();
      while (n == 0.0) {
        for (Index i = 0; i < k; ++i) out[i] = gauss(rng);
        n = out.norm();
      }
      const double r = radius * std::pow(unit(rng), 1.0 / static_cast<double>(k));
      return out * (r / n);
    }
    default: {
      // k+1 exponentials normalised give a uniform point of the simplex interior.
      std::exponential_distribution<double> expo(1.0);
      double total = 0.0;
      for (Index i = 0; i < k; ++i) {
        out[i] = expo(rng);
        total += out[i];
      }
      total += expo(rng);
      for (Index i = 0; i < k; ++i) out[i] = radius * out[i] / total * (unit(rng) < 0.5 ? -1.0 : 1.0);
      return out;
    }
  }
}

}  // namespace capfair
