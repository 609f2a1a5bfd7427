#include "fprk/kernels.hpp"

#include <omp.h>

#include "fprk/embstore.hpp"

namespace fprk {

VectorBlock::VectorBlock(std::span<const EmbeddingRecord* const> records) {
  if (records.empty()) return;
  dim_ = static_cast<std::uint32_t>(records.front()->vector.size());
  data_.reserve(records.size() * dim_);
  norms_.reserve(records.size());
  for (const auto* r : records) {
    data_.insert(data_.end(), r->vector.begin(), r->vector.end());
    norms_.push_back(norm64(r->vector));
  }
}

namespace kernels {

std::vector<double> similarity_matrix_serial(const VectorBlock& q, const VectorBlock& g) {
  const std::size_t nq = q.rows();
  const std::size_t ng = g.rows();
  std::vector<double> out(nq * ng);
  for (std::size_t i = 0; i < nq; ++i)
    for (std::size_t j = 0; j < ng; ++j)
      out[i * ng + j] = cosine_from_norms(q.row(i), g.row(j), q.norm(i), g.norm(j));
  return out;
}

std::vector<double> similarity_matrix_parallel(const VectorBlock& q, const VectorBlock& g) {
  const auto nq = static_cast<std::int64_t>(q.rows());
  const std::size_t ng = g.rows();
  std::vector<double> out(q.rows() * ng);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < nq; ++i) {
    const auto qi = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < ng; ++j)
      out[qi * ng + j] = cosine_from_norms(q.row(qi), g.row(j), q.norm(qi), g.norm(j));
  }
  return out;
}

std::vector<double> similarity_matrix(const VectorBlock& q, const VectorBlock& g, Exec exec) {
  return exec == Exec::serial ? similarity_matrix_serial(q, g) : similarity_matrix_parallel(q, g);
}

namespace {

inline void assign_one(const double* p, std::span<const double> centroids, std::size_t dim,
                       std::size_t& best, double& best_d) {
  const std::size_t k = centroids.size() / dim;
  best = 0;
  best_d = squared_distance(p, centroids.data(), dim);
  for (std::size_t c = 1; c < k; ++c) {
    const double d = squared_distance(p, centroids.data() + c * dim, dim);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
}

}  // namespace

void assign_nearest_serial(std::span<const double> points, std::span<const double> centroids,
                           std::size_t dim, std::span<std::size_t> assignment,
                           std::span<double> sq_dist) {
  const std::size_t n = points.size() / dim;
  for (std::size_t i = 0; i < n; ++i)
    assign_one(points.data() + i * dim, centroids, dim, assignment[i], sq_dist[i]);
}

void assign_nearest_parallel(std::span<const double> points, std::span<const double> centroids,
                             std::size_t dim, std::span<std::size_t> assignment,
                             std::span<double> sq_dist) {
  const auto n = static_cast<std::int64_t>(points.size() / dim);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto pi = static_cast<std::size_t>(i);
    assign_one(points.data() + pi * dim, centroids, dim, assignment[pi], sq_dist[pi]);
  }
}

void assign_nearest(std::span<const double> points, std::span<const double> centroids,
                    std::size_t dim, std::span<std::size_t> assignment, std::span<double> sq_dist,
                    Exec exec) {
  if (exec == Exec::serial)
    assign_nearest_serial(points, centroids, dim, assignment, sq_dist);
  else
    assign_nearest_parallel(points, centroids, dim, assignment, sq_dist);
}

}  // namespace kernels

void set_thread_count(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int thread_count() { return omp_get_max_threads(); }

}  // namespace fprk
