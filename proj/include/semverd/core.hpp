#pragma once

// Vector math shared by every verification path. All arithmetic is double.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semverd/error.hpp"

namespace semverd {

/// Cosine similarity in [-1, 1].
using SimilarityScore = double;

/// Norms at or below this are treated as a degenerate (zero) vector.
inline constexpr double kZeroNormEpsilon = 1e-12;

namespace detail {

inline void require_same_dimension(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(Errc::DimensionMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}

}  // namespace detail

inline double dot(std::span<const double> a, std::span<const double> b) {
  detail::require_same_dimension(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

inline double l2_norm(std::span<const double> v) noexcept {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

/// Unit-norm embedding of a text. Construction goes through l2_normalize,
/// so every instance satisfies |v| == 1 up to rounding.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::size_t dimension() const noexcept { return values_.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }
  [[nodiscard]] const std::vector<double>& raw() const noexcept { return values_; }

  operator std::span<const double>() const noexcept { return values_; }  // NOLINT

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

  friend EmbeddingVector l2_normalize(std::vector<double> v);

 private:
  explicit EmbeddingVector(std::vector<double> v) : values_(std::move(v)) {}

  std::vector<double> values_;
};

/// Scales `v` to unit L2 norm. Throws ZeroVector when |v| <= 1e-12.
inline EmbeddingVector l2_normalize(std::vector<double> v) {
  const double norm = l2_norm(v);
  if (!(norm > kZeroNormEpsilon)) {
    throw Error(Errc::ZeroVector, "cannot normalize a vector with norm " + std::to_string(norm));
  }
  for (double& x : v) x /= norm;
  return EmbeddingVector(std::move(v));
}

inline EmbeddingVector l2_normalize(std::span<const double> v) {
  return l2_normalize(std::vector<double>(v.begin(), v.end()));
}

/// dot(a,b) / (|a| |b|), clamped to [-1, 1].
inline SimilarityScore cosine_similarity(std::span<const double> a, std::span<const double> b) {
  detail::require_same_dimension(a, b);
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (!(na > kZeroNormEpsilon) || !(nb > kZeroNormEpsilon)) {
    throw Error(Errc::ZeroVector, "cosine similarity of a zero-norm vector");
  }
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  detail::require_same_dimension(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

}  // namespace semverd
