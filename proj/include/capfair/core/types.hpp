#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace capfair {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Vector with a phantom tag so observed, exogenous and semi-latent coordinates
// cannot be mixed up by accident.
template <typename Tag>
class TaggedVector {
 public:
  TaggedVector() = default;
  explicit TaggedVector(Vector values) : values_(std::move(values)) {}
  explicit TaggedVector(Index n) : values_(Vector::Zero(n)) {}
  TaggedVector(std::initializer_list<double> xs) : values_(static_cast<Index>(xs.size())) {
    Index i = 0;
    for (double x : xs) values_[i++] = x;
  }

  [[nodiscard]] Index size() const { return values_.size(); }
  double operator[](Index i) const { return values_[i]; }
  double& operator[](Index i) { return values_[i]; }
  [[nodiscard]] const Vector& values() const { return values_; }
  Vector& values() { return values_; }

  friend bool operator==(const TaggedVector& a, const TaggedVector& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  Vector values_;
};

using Instance = TaggedVector<struct InstanceTag>;
using ExogenousPoint = TaggedVector<struct ExogenousTag>;
using SemiLatentPoint = TaggedVector<struct SemiLatentTag>;

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  return mix_seed(mix_seed(root) ^ mix_seed(stream + 0x5851f42d4c957f2dULL));
}

inline double max_abs_rel_error(const Vector& a, const Vector& b) {
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const double scale = std::max(1.0, std::abs(b[i]));
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace capfair
