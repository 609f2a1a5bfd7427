#pragma once

// Data-parallel inner loops. Every kernel has a serial reference and an
// OpenMP version; both perform the same floating-point operations in the same
// order per output element, so their results are bit-identical for any thread
// count. Tests compare the two directly and bench/ times them.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace fprk {

struct EmbeddingRecord;

enum class Exec { serial, parallel };

/// Contiguous row-major copy of a group of vectors plus their 64-bit norms.
class VectorBlock {
 public:
  VectorBlock() = default;
  explicit VectorBlock(std::span<const EmbeddingRecord* const> records);

  std::size_t rows() const { return norms_.size(); }
  std::uint32_t dim() const { return dim_; }
  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  double norm(std::size_t i) const { return norms_[i]; }

 private:
  std::uint32_t dim_ = 0;
  std::vector<float> data_;
  std::vector<double> norms_;
};

/// 64-bit dot product, accumulated in index order.
inline double dot64(std::span<const float> u, std::span<const float> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    acc += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  return acc;
}

inline double norm64(std::span<const float> u) { return std::sqrt(dot64(u, u)); }

/// dot / (|u| |v|) clamped to [-1, 1]. The one place cosine is evaluated.
inline double cosine_from_norms(std::span<const float> u, std::span<const float> v, double norm_u,
                                double norm_v) {
  const double c = dot64(u, v) / (norm_u * norm_v);
  return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}

namespace kernels {

/// queries.rows() x gallery.rows() cosine matrix, row-major.
std::vector<double> similarity_matrix_serial(const VectorBlock& queries, const VectorBlock& gallery);
std::vector<double> similarity_matrix_parallel(const VectorBlock& queries,
                                               const VectorBlock& gallery);
std::vector<double> similarity_matrix(const VectorBlock& queries, const VectorBlock& gallery,
                                      Exec exec);

/// Nearest-centroid assignment over row-major 64-bit points. Ties go to the
/// lower centroid index. Writes the squared distance to the chosen centroid.
void assign_nearest_serial(std::span<const double> points, std::span<const double> centroids,
                           std::size_t dim, std::span<std::size_t> assignment,
                           std::span<double> sq_dist);
void assign_nearest_parallel(std::span<const double> points, std::span<const double> centroids,
                             std::size_t dim, std::span<std::size_t> assignment,
                             std::span<double> sq_dist);
void assign_nearest(std::span<const double> points, std::span<const double> centroids,
                    std::size_t dim, std::span<std::size_t> assignment, std::span<double> sq_dist,
                    Exec exec);

/// Squared Euclidean distance, accumulated in index order.
inline double squared_distance(const double* a, const double* b, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace kernels

/// Sets the OpenMP team size used by the parallel kernels (0 = runtime default).
void set_thread_count(int threads);
int thread_count();

}  // namespace fprk
