#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "gcn/tensor.hpp"

namespace gcn {

/// The fixed operators derived from an undirected adjacency matrix A.
struct GraphOperatorSet {
  SparseMatrix adjacency;            // A, symmetric, zero diagonal
  SparseMatrix self_loop_adjacency;  // Ã = A + I
  SparseMatrix norm_adjacency;       // D̃^{-1/2} Ã D̃^{-1/2}
  SparseMatrix laplacian;            // D − A
  std::vector<double> self_loop_degree;  // diagonal of D̃
};

/// Throws ValidationError unless `adjacency` is square, symmetric,
/// non-negative and has an all-zero diagonal.
void validate_adjacency(const SparseMatrix& adjacency);

GraphOperatorSet build_operators(const SparseMatrix& adjacency);

enum class TransitionProvenance { exact, estimated };

struct WalkSettings {
  std::size_t n_walks = 10000;
  std::uint64_t seed = 0;
  double prune_threshold = 0.0;
};

/// Row-stochastic k-step random-walk operator.
struct TransitionMatrix {
  int order = 1;
  SparseMatrix matrix;
  TransitionProvenance provenance = TransitionProvenance::exact;
  std::optional<WalkSettings> walk;  // set when estimated
};

/// P¹ = D̃⁻¹ Ã.
SparseMatrix one_step_transition(const GraphOperatorSet& operators);

/// (P¹)^k by repeated sparse products.
TransitionMatrix exact_transition_matrix(const GraphOperatorSet& operators,
                                         int k);

/// Monte-Carlo estimate of (P¹)^k: n_walks walks of exactly k steps from
/// every node. Walk w from node i draws from its own counter-keyed stream
/// (seed, i, w), so the result does not depend on thread count. Entries
/// below prune_threshold are dropped and each row renormalized; if that
/// would empty a row, its largest entries are kept.
TransitionMatrix walk_estimated_transition_matrix(
    const GraphOperatorSet& operators, int k, std::size_t n_walks,
    std::uint64_t seed, double prune_threshold = 0.0);

/// Relabels nodes: result(perm[i], perm[j]) = m(i, j).
SparseMatrix permute_symmetric(const SparseMatrix& m,
                               std::span<const std::size_t> perm);

namespace reference {

/// Single-threaded walk estimator over the same per-walk streams.
TransitionMatrix walk_estimated_transition_matrix(
    const GraphOperatorSet& operators, int k, std::size_t n_walks,
    std::uint64_t seed, double prune_threshold = 0.0);

}  // namespace reference

}  // namespace gcn
