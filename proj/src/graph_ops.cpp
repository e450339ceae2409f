#include "gcn/graph_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gcn/errors.hpp"
#include "gcn/random.hpp"

namespace gcn {

void validate_adjacency(const SparseMatrix& adjacency) {
  if (adjacency.rows() != adjacency.cols()) {
    throw ValidationError("adjacency must be square");
  }
  for (std::size_t i = 0; i < adjacency.rows(); ++i) {
    const auto cols = adjacency.row_cols(i);
    const auto vals = adjacency.row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      const std::size_t j = cols[p];
      if (!(vals[p] > 0.0) || !std::isfinite(vals[p])) {
        throw ValidationError("adjacency entry (" + std::to_string(i) + ", " +
                              std::to_string(j) + ") is not positive");
      }
      if (j == i) {
        throw ValidationError("adjacency has a self-loop at node " +
                              std::to_string(i));
      }
      if (adjacency.at(j, i) != vals[p]) {
        throw ValidationError("adjacency is not symmetric at (" +
                              std::to_string(i) + ", " + std::to_string(j) +
                              ")");
      }
    }
  }
}

GraphOperatorSet build_operators(const SparseMatrix& adjacency) {
  validate_adjacency(adjacency);
  const std::size_t n = adjacency.rows();
  GraphOperatorSet ops;
  ops.adjacency = adjacency;
  ops.self_loop_adjacency = add(adjacency, SparseMatrix::identity(n));
  ops.self_loop_degree = row_sum(ops.self_loop_adjacency);

  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    inv_sqrt[i] = 1.0 / std::sqrt(ops.self_loop_degree[i]);
  }
  const SparseMatrix& at = ops.self_loop_adjacency;
  std::vector<double> norm_vals(at.nnz());
  for (std::size_t i = 0; i < n; ++i) {
    const auto cols = at.row_cols(i);
    const auto vals = at.row_values(i);
    const std::size_t base = at.row_offsets()[i];
    for (std::size_t p = 0; p < cols.size(); ++p) {
      norm_vals[base + p] = inv_sqrt[i] * vals[p] * inv_sqrt[cols[p]];
    }
  }
  ops.norm_adjacency = at.with_values(std::move(norm_vals));

  const std::vector<double> degree = row_sum(adjacency);
  ops.laplacian = add(SparseMatrix::diagonal(degree), scale(adjacency, -1.0));
  return ops;
}

SparseMatrix one_step_transition(const GraphOperatorSet& operators) {
  const SparseMatrix& at = operators.self_loop_adjacency;
  std::vector<double> vals(at.nnz());
  for (std::size_t i = 0; i < at.rows(); ++i) {
    const auto row = at.row_values(i);
    const std::size_t base = at.row_offsets()[i];
    for (std::size_t p = 0; p < row.size(); ++p) {
      vals[base + p] = row[p] / operators.self_loop_degree[i];
    }
  }
  return at.with_values(std::move(vals));
}

TransitionMatrix exact_transition_matrix(const GraphOperatorSet& operators,
                                         int k) {
  if (k < 1) throw ValidationError("transition order k must be >= 1");
  const SparseMatrix step = one_step_transition(operators);
  SparseMatrix power = step;
  for (int i = 1; i < k; ++i) power = sparse_matmul(power, step);
  return {k, std::move(power), TransitionProvenance::exact, std::nullopt};
}

namespace {

struct WalkTable {
  const SparseMatrix* step;
  std::vector<double> cumulative;  // per nonzero of `step`, row-local prefix
};

WalkTable make_walk_table(const SparseMatrix& step) {
  WalkTable table{&step, std::vector<double>(step.nnz())};
  for (std::size_t i = 0; i < step.rows(); ++i) {
    double running = 0.0;
    const auto vals = step.row_values(i);
    const std::size_t base = step.row_offsets()[i];
    for (std::size_t p = 0; p < vals.size(); ++p) {
      running += vals[p];
      table.cumulative[base + p] = running;
    }
  }
  return table;
}

std::size_t next_node(const WalkTable& table, std::size_t node, double u) {
  const SparseMatrix& step = *table.step;
  const std::size_t begin = step.row_offsets()[node];
  const std::size_t end = step.row_offsets()[node + 1];
  const auto first = table.cumulative.begin() + static_cast<std::ptrdiff_t>(begin);
  const auto last = table.cumulative.begin() + static_cast<std::ptrdiff_t>(end);
  const double target = u * *(last - 1);
  auto it = std::upper_bound(first, last, target);
  if (it == last) --it;
  return step.col_indices()[begin + static_cast<std::size_t>(it - first)];
}

// Visit counts for one start node, pruned and normalized.
struct EstimatedRow {
  std::vector<std::size_t> cols;
  std::vector<double> vals;
};

class RowEstimator {
 public:
  RowEstimator(const WalkTable& table, int k, std::size_t n_walks,
               std::uint64_t seed, double prune_threshold)
      : table_(table),
        k_(k),
        n_walks_(n_walks),
        seed_(seed),
        prune_(prune_threshold),
        counts_(table.step->rows(), 0) {}

  double freq_of(std::size_t count) const {
    return static_cast<double>(count) / static_cast<double>(n_walks_);
  }

  EstimatedRow estimate(std::size_t start) {
    touched_.clear();
    for (std::size_t w = 0; w < n_walks_; ++w) {
      CounterRng rng(seed_, start, w);
      std::size_t node = start;
      for (int s = 0; s < k_; ++s) node = next_node(table_, node, rng.next_double());
      if (counts_[node]++ == 0) touched_.push_back(node);
    }
    std::sort(touched_.begin(), touched_.end());

    std::size_t max_count = 0;
    for (const std::size_t j : touched_) max_count = std::max(max_count, counts_[j]);
    const bool any_kept = freq_of(max_count) >= prune_;

    EstimatedRow row;
    std::size_t kept_total = 0;
    for (const std::size_t j : touched_) {
      const bool keep = any_kept ? freq_of(counts_[j]) >= prune_ : counts_[j] == max_count;
      if (keep) {
        row.cols.push_back(j);
        kept_total += counts_[j];
      }
    }
    row.vals.reserve(row.cols.size());
    for (const std::size_t j : row.cols) {
      row.vals.push_back(static_cast<double>(counts_[j]) /
                         static_cast<double>(kept_total));
    }
    for (const std::size_t j : touched_) counts_[j] = 0;
    return row;
  }

 private:
  const WalkTable& table_;
  int k_;
  std::size_t n_walks_;
  std::uint64_t seed_;
  double prune_;
  std::vector<std::size_t> counts_;
  std::vector<std::size_t> touched_;
};

void check_walk_args(int k, std::size_t n_walks, double prune_threshold) {
  if (k < 1) throw ValidationError("transition order k must be >= 1");
  if (n_walks < 1) throw ValidationError("n_walks must be >= 1");
  if (!(prune_threshold >= 0.0 && prune_threshold < 1.0)) {
    throw ValidationError("prune_threshold must lie in [0, 1)");
  }
}

TransitionMatrix assemble(std::size_t n, int k, std::vector<EstimatedRow>& rows,
                          WalkSettings settings) {
  std::vector<std::size_t> offsets(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) offsets[i + 1] = offsets[i] + rows[i].cols.size();
  std::vector<std::size_t> cols;
  std::vector<double> vals;
  cols.reserve(offsets.back());
  vals.reserve(offsets.back());
  for (auto& r : rows) {
    cols.insert(cols.end(), r.cols.begin(), r.cols.end());
    vals.insert(vals.end(), r.vals.begin(), r.vals.end());
    r = {};
  }
  return {k,
          SparseMatrix::from_csr(n, n, std::move(offsets), std::move(cols),
                                 std::move(vals)),
          TransitionProvenance::estimated, settings};
}

}  // namespace

TransitionMatrix walk_estimated_transition_matrix(
    const GraphOperatorSet& operators, int k, std::size_t n_walks,
    std::uint64_t seed, double prune_threshold) {
  check_walk_args(k, n_walks, prune_threshold);
  const SparseMatrix step = one_step_transition(operators);
  const WalkTable table = make_walk_table(step);
  const std::size_t n = step.rows();
  std::vector<EstimatedRow> rows(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel
  {
    RowEstimator estimator(table, k, n_walks, seed, prune_threshold);
#pragma omp for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      rows[static_cast<std::size_t>(i)] =
          estimator.estimate(static_cast<std::size_t>(i));
    }
  }
  return assemble(n, k, rows, {n_walks, seed, prune_threshold});
}

namespace reference {

TransitionMatrix walk_estimated_transition_matrix(
    const GraphOperatorSet& operators, int k, std::size_t n_walks,
    std::uint64_t seed, double prune_threshold) {
  check_walk_args(k, n_walks, prune_threshold);
  const SparseMatrix step = one_step_transition(operators);
  const WalkTable table = make_walk_table(step);
  const std::size_t n = step.rows();
  std::vector<EstimatedRow> rows(n);
  RowEstimator estimator(table, k, n_walks, seed, prune_threshold);
  for (std::size_t i = 0; i < n; ++i) rows[i] = estimator.estimate(i);
  return assemble(n, k, rows, {n_walks, seed, prune_threshold});
}

}  // namespace reference

SparseMatrix permute_symmetric(const SparseMatrix& m,
                               std::span<const std::size_t> perm) {
  if (m.rows() != m.cols() || perm.size() != m.rows()) {
    throw ShapeError("permute_symmetric: permutation does not match matrix");
  }
  std::vector<Triplet> entries;
  entries.reserve(m.nnz());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto cols = m.row_cols(i);
    const auto vals = m.row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      entries.push_back({perm[i], perm[cols[p]], vals[p]});
    }
  }
  return SparseMatrix::from_triplets(m.rows(), m.cols(), std::move(entries));
}

}  // namespace gcn
