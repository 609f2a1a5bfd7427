#include <benchmark/benchmark.h>

#include <vector>

#include "fprk/embstore.hpp"
#include "fprk/kernels.hpp"
#include "fprk/rng.hpp"

namespace {

using namespace fprk;

std::vector<EmbeddingRecord> random_records(std::size_t n, std::size_t dim, std::uint64_t seed) {
  CounterRng rng(derive_key(seed, {n, dim}));
  std::vector<EmbeddingRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].id = "r" + std::to_string(i);
    out[i].subject = "s";
    out[i].vector.resize(dim);
    for (auto& x : out[i].vector) x = static_cast<float>(rng.next_gaussian());
  }
  return out;
}

VectorBlock block_of(const std::vector<EmbeddingRecord>& records) {
  std::vector<const EmbeddingRecord*> ptrs;
  for (const auto& r : records) ptrs.push_back(&r);
  return VectorBlock(ptrs);
}

void BM_SimilarityMatrix(benchmark::State& state, Exec exec) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto q = random_records(n / 4, 512, 1);
  const auto g = random_records(n, 512, 2);
  const auto qb = block_of(q);
  const auto gb = block_of(g);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::similarity_matrix(qb, gb, exec));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(qb.rows() * gb.rows()));
}

void BM_AssignNearest(benchmark::State& state, Exec exec) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 128, k = 16;
  CounterRng rng(derive_key(3, {n}));
  std::vector<double> points(n * dim), centroids(k * dim);
  for (auto& x : points) x = rng.next_gaussian();
  for (auto& x : centroids) x = rng.next_gaussian();
  std::vector<std::size_t> assign(n);
  std::vector<double> dist(n);
  for (auto _ : state) {
    kernels::assign_nearest(points, centroids, dim, assign, dist, exec);
    benchmark::DoNotOptimize(dist.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * k));
}

}  // namespace

BENCHMARK_CAPTURE(BM_SimilarityMatrix, serial, fprk::Exec::serial)->Arg(256)->Arg(1024)->Arg(4096);
BENCHMARK_CAPTURE(BM_SimilarityMatrix, parallel, fprk::Exec::parallel)->Arg(256)->Arg(1024)->Arg(4096);
BENCHMARK_CAPTURE(BM_AssignNearest, serial, fprk::Exec::serial)->Arg(1000)->Arg(10000)->Arg(100000);
BENCHMARK_CAPTURE(BM_AssignNearest, parallel, fprk::Exec::parallel)->Arg(1000)->Arg(10000)->Arg(100000);

BENCHMARK_MAIN();
