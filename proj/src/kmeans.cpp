#include "fprk/kmeans.hpp"

#include <algorithm>
#include <cmath>

#include "fprk/error.hpp"
#include "fprk/rng.hpp"

namespace fprk {

namespace {

std::vector<double> plus_plus_init(std::span<const double> points, std::size_t n, std::size_t dim,
                                   std::size_t k, CounterRng& rng) {
  std::vector<double> centroids;
  centroids.reserve(k * dim);
  std::vector<bool> chosen(n, false);
  auto take = [&](std::size_t i) {
    chosen[i] = true;
    centroids.insert(centroids.end(), points.begin() + static_cast<std::ptrdiff_t>(i * dim),
                     points.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
  };
  take(static_cast<std::size_t>(rng.next_below(n)));

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i)
    d2[i] = kernels::squared_distance(points.data() + i * dim, centroids.data(), dim);

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = rng.next_unit() * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] == 0.0) continue;
        cum += d2[i];
        pick = i;
        if (cum > target) break;
      }
    } else {
      // All remaining points coincide with a centroid; fall back to a
      // uniform pick among the unchosen ones.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) free.push_back(i);
      pick = free[static_cast<std::size_t>(rng.next_below(free.size()))];
    }
    take(pick);
    const double* cp = centroids.data() + c * dim;
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], kernels::squared_distance(points.data() + i * dim, cp, dim));
  }
  return centroids;
}

// Moves the farthest point of a multi-member cluster into each empty cluster.
void repair_empty(std::span<const double> points, std::size_t dim, std::vector<double>& centroids,
                  std::vector<std::size_t>& assignment, std::vector<double>& sq_dist,
                  std::size_t k) {
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t a : assignment) ++sizes[a];
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] != 0) continue;
    std::size_t far = assignment.size();
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      if (sizes[assignment[i]] < 2) continue;
      if (far == assignment.size() || sq_dist[i] > sq_dist[far]) far = i;
    }
    --sizes[assignment[far]];
    assignment[far] = c;
    ++sizes[c];
    sq_dist[far] = 0.0;
    std::copy_n(points.begin() + static_cast<std::ptrdiff_t>(far * dim), dim,
                centroids.begin() + static_cast<std::ptrdiff_t>(c * dim));
  }
}

double sum_in_order(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

KMeansResult kmeans(std::span<const double> points, std::size_t dim, const KMeansOptions& opt) {
  if (dim == 0 || points.size() % dim != 0) throw ValidationError("kmeans: bad point layout");
  const std::size_t n = points.size() / dim;
  if (opt.k == 0) throw ValidationError("kmeans: k must be at least 1");
  if (opt.k > n)
    throw ValidationError("kmeans: k=" + std::to_string(opt.k) + " exceeds point count " +
                          std::to_string(n));
  for (double x : points)
    if (!std::isfinite(x)) throw ValidationError("kmeans: non-finite point coordinate");

  const std::size_t k = opt.k;
  CounterRng rng(derive_key(opt.seed, {0x6b6d65616e73ULL}));  // "kmeans"

  KMeansResult res;
  res.dim = dim;
  res.centroids = plus_plus_init(points, n, dim, k, rng);
  res.assignments.assign(n, 0);
  std::vector<double> sq_dist(n);
  std::vector<double> next(k * dim);
  std::vector<std::size_t> sizes(k);

  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    kernels::assign_nearest(points, res.centroids, dim, res.assignments, sq_dist, opt.exec);
    repair_empty(points, dim, res.centroids, res.assignments, sq_dist, k);
    res.inertia_history.push_back(sum_in_order(sq_dist));

    std::fill(next.begin(), next.end(), 0.0);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = res.assignments[i];
      ++sizes[c];
      for (std::size_t d = 0; d < dim; ++d) next[c * dim + d] += points[i * dim + d];
    }
    double max_shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t d = 0; d < dim; ++d) next[c * dim + d] /= static_cast<double>(sizes[c]);
      max_shift = std::max(max_shift, std::sqrt(kernels::squared_distance(
                                          next.data() + c * dim, res.centroids.data() + c * dim, dim)));
    }
    res.centroids.swap(next);
    res.iterations = it;
    if (max_shift < opt.tol) {
      res.converged = true;
      break;
    }
  }

  kernels::assign_nearest(points, res.centroids, dim, res.assignments, sq_dist, opt.exec);
  repair_empty(points, dim, res.centroids, res.assignments, sq_dist, k);
  res.inertia = sum_in_order(sq_dist);
  res.inertia_history.push_back(res.inertia);
  return res;
}

KMeansResult kmeans(const std::vector<std::vector<float>>& points, const KMeansOptions& opt) {
  if (points.empty()) throw ValidationError("kmeans: no points");
  const std::size_t dim = points.front().size();
  std::vector<double> flat;
  flat.reserve(points.size() * dim);
  for (const auto& p : points) {
    if (p.size() != dim) throw ValidationError("kmeans: dimension mismatch between points");
    flat.insert(flat.end(), p.begin(), p.end());
  }
  return kmeans(flat, dim, opt);
}

}  // namespace fprk
