// Parallel kernels against their serial reference versions.
//
//   bench_kernels --benchmark_filter=spmm
//
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>

#include "gcn/dataset.hpp"
#include "gcn/graph_ops.hpp"
#include "gcn/tensor.hpp"

namespace {

using namespace gcn;

DenseMatrix random_dense(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix m(r, c);
  for (double& v : m.data()) v = u(rng);
  return m;
}

// Citation-like graph: sparse SBM with a few thousand nodes.
const GraphOperatorSet& graph(std::size_t n) {
  static std::size_t cached_n = 0;
  static GraphOperatorSet ops;
  if (cached_n != n) {
    SbmParams p;
    p.nodes_per_block = n / 4;
    p.blocks = 4;
    p.p_in = 8.0 / static_cast<double>(n);
    p.p_out = 0.5 / static_cast<double>(n);
    p.seed = 1;
    ops = build_operators(generate_sbm(p).adjacency);
    cached_n = n;
  }
  return ops;
}

template <bool Parallel>
void BM_spmm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const SparseMatrix& s = graph(n).norm_adjacency;
  const DenseMatrix d = random_dense(n, 16, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? spmm(s, d) : reference::spmm(s, d));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.nnz() * 16));
}

template <bool Parallel>
void BM_dense_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseMatrix a = random_dense(n, 256, 3);
  const DenseMatrix b = random_dense(256, 16, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? dense_matmul(a, b) : reference::dense_matmul(a, b));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 256 * 16));
}

template <bool Parallel>
void BM_sparse_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const SparseMatrix p = one_step_transition(graph(n));
  const SparseMatrix p2 = sparse_matmul(p, p);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? sparse_matmul(p2, p) : reference::sparse_matmul(p2, p));
  }
}

template <bool Parallel>
void BM_walk_estimator(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const GraphOperatorSet& ops = graph(n);
  const std::size_t n_walks = 1000;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        Parallel ? walk_estimated_transition_matrix(ops, 3, n_walks, 5)
                 : reference::walk_estimated_transition_matrix(ops, 3, n_walks, 5));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n_walks * 3));
}

}  // namespace

BENCHMARK(BM_spmm<false>)->Name("spmm/reference")->Arg(2000)->Arg(8000);
BENCHMARK(BM_spmm<true>)->Name("spmm/parallel")->Arg(2000)->Arg(8000);
BENCHMARK(BM_dense_matmul<false>)->Name("dense_matmul/reference")->Arg(2000);
BENCHMARK(BM_dense_matmul<true>)->Name("dense_matmul/parallel")->Arg(2000);
BENCHMARK(BM_sparse_matmul<false>)->Name("sparse_matmul/reference")->Arg(2000);
BENCHMARK(BM_sparse_matmul<true>)->Name("sparse_matmul/parallel")->Arg(2000);
BENCHMARK(BM_walk_estimator<false>)->Name("walk_estimator/reference")->Arg(2000);
BENCHMARK(BM_walk_estimator<true>)->Name("walk_estimator/parallel")->Arg(2000);

BENCHMARK_MAIN();
