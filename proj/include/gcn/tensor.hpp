#pragma once

// Dense and CSR matrices in 64-bit precision plus the arithmetic the model
// needs. Kernels in namespace gcn are OpenMP-parallel over output rows; the
// plain loops in gcn::reference follow the same per-entry accumulation order
// and are kept so tests can demand bit-identical results from both.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace gcn {

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix from_rows(
      std::initializer_list<std::initializer_list<double>> rows);
  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) noexcept {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool all_finite() const noexcept;

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within a row and no stored value is zero.
class SparseMatrix {
 public:
  SparseMatrix() : row_offsets_(1, 0) {}
  SparseMatrix(std::size_t rows, std::size_t cols);

  /// Duplicate coordinates are summed; entries that end up zero are dropped.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets);
  /// Validates the CSR invariants and drops stored zeros.
  static SparseMatrix from_csr(std::size_t rows, std::size_t cols,
                               std::vector<std::size_t> row_offsets,
                               std::vector<std::size_t> col_indices,
                               std::vector<double> values);
  static SparseMatrix from_dense(const DenseMatrix& dense);
  static SparseMatrix identity(std::size_t n);
  static SparseMatrix diagonal(std::span<const double> diag);

  DenseMatrix to_dense() const;

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_offsets() const noexcept {
    return row_offsets_;
  }
  std::span<const std::size_t> col_indices() const noexcept {
    return col_indices_;
  }
  std::span<const double> values() const noexcept { return values_; }

  std::span<const std::size_t> row_cols(std::size_t i) const noexcept {
    return {col_indices_.data() + row_offsets_[i],
            row_offsets_[i + 1] - row_offsets_[i]};
  }
  std::span<const double> row_values(std::size_t i) const noexcept {
    return {values_.data() + row_offsets_[i],
            row_offsets_[i + 1] - row_offsets_[i]};
  }

  /// Stored value at (i, j), zero when absent.
  double at(std::size_t i, std::size_t j) const;

  /// Same sparsity pattern, values replaced. Zeros in `values` are pruned.
  SparseMatrix with_values(std::vector<double> values) const;

  bool operator==(const SparseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_offsets_;
  std::vector<std::size_t> col_indices_;
  std::vector<double> values_;
};

// Products. Each output entry is accumulated from 0.0 in ascending index
// order of the contracted dimension.
DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& d);
DenseMatrix dense_matmul(const DenseMatrix& a, const DenseMatrix& b);
SparseMatrix sparse_matmul(const SparseMatrix& a, const SparseMatrix& b);

DenseMatrix transpose(const DenseMatrix& m);
SparseMatrix transpose(const SparseMatrix& m);

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scale(const DenseMatrix& m, double factor);
DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);
SparseMatrix add(const SparseMatrix& a, const SparseMatrix& b);
SparseMatrix scale(const SparseMatrix& m, double factor);

std::vector<double> row_sum(const DenseMatrix& m);
std::vector<double> row_sum(const SparseMatrix& m);

/// Sum over all entries of a ∘ b, i.e. trace(aᵀ b).
double frobenius_dot(const DenseMatrix& a, const DenseMatrix& b);
double sum_squares(const DenseMatrix& m);
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

namespace reference {

DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& d);
DenseMatrix dense_matmul(const DenseMatrix& a, const DenseMatrix& b);
SparseMatrix sparse_matmul(const SparseMatrix& a, const SparseMatrix& b);

}  // namespace reference

}  // namespace gcn
