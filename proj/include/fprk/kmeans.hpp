#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fprk/kernels.hpp"

namespace fprk {

struct KMeansOptions {
  std::size_t k = 1;
  std::uint64_t seed = 0;
  double tol = 1e-6;  // stop when max centroid displacement drops below this
  std::size_t max_iter = 100;
  Exec exec = Exec::parallel;
};

struct KMeansResult {
  std::size_t dim = 0;
  std::vector<double> centroids;         // k x dim, row-major
  std::vector<std::size_t> assignments;  // point -> cluster
  double inertia = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// Inertia after each assignment step, then the final one. Non-increasing.
  std::vector<double> inertia_history;

  std::size_t k() const { return dim == 0 ? 0 : centroids.size() / dim; }
  std::span<const double> centroid(std::size_t c) const {
    return {centroids.data() + c * dim, dim};
  }

  friend bool operator==(const KMeansResult&, const KMeansResult&) = default;
};

/// Lloyd's algorithm on raw Euclidean distance from a seeded k-means++ start.
///
/// `points` is row-major (n x dim). Empty clusters are repaired by moving the
/// point farthest from its centroid into them. Throws ValidationError when
/// k == 0, k > n or a point is non-finite.
KMeansResult kmeans(std::span<const double> points, std::size_t dim, const KMeansOptions& options);

/// Convenience overload for float vectors (one per point).
KMeansResult kmeans(const std::vector<std::vector<float>>& points, const KMeansOptions& options);

}  // namespace fprk
