#include "gcn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>

#include "gcn/errors.hpp"

namespace gcn {

namespace {

std::string shape_str(std::size_t r, std::size_t c) {
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b,
                        const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": " + shape_str(a.rows(), a.cols()) +
                     " vs " + shape_str(b.rows(), b.cols()));
  }
}

void require_inner(std::size_t lhs_cols, std::size_t rhs_rows, const char* op,
                   std::size_t lr, std::size_t rc) {
  if (lhs_cols != rhs_rows) {
    throw ShapeError(std::string(op) + ": " + shape_str(lr, lhs_cols) + " * " +
                     shape_str(rhs_rows, rc));
  }
}

// Entries of one sparse-product row, ascending by column.
struct SparseRow {
  std::vector<std::size_t> cols;
  std::vector<double> vals;
};

SparseMatrix assemble_rows(std::size_t rows, std::size_t cols,
                           std::vector<SparseRow>& parts) {
  std::vector<std::size_t> offsets(rows + 1, 0);
  for (std::size_t i = 0; i < rows; ++i) {
    offsets[i + 1] = offsets[i] + parts[i].cols.size();
  }
  std::vector<std::size_t> col_idx(offsets.back());
  std::vector<double> vals(offsets.back());
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy(parts[i].cols.begin(), parts[i].cols.end(),
              col_idx.begin() + static_cast<std::ptrdiff_t>(offsets[i]));
    std::copy(parts[i].vals.begin(), parts[i].vals.end(),
              vals.begin() + static_cast<std::ptrdiff_t>(offsets[i]));
  }
  return SparseMatrix::from_csr(rows, cols, std::move(offsets),
                                std::move(col_idx), std::move(vals));
}

}  // namespace

// ---------------------------------------------------------------------------
// DenseMatrix

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols,
                         std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("DenseMatrix: " + std::to_string(data_.size()) +
                     " values for shape " + shape_str(rows_, cols_));
  }
}

DenseMatrix DenseMatrix::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("DenseMatrix::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(data));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// SparseMatrix

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_offsets_(rows + 1, 0) {}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) {
      throw ShapeError("SparseMatrix::from_triplets: entry (" +
                       std::to_string(t.row) + ", " + std::to_string(t.col) +
                       ") outside " + shape_str(rows, cols));
    }
  }
  std::stable_sort(triplets.begin(), triplets.end(),
                   [](const Triplet& a, const Triplet& b) {
                     return a.row != b.row ? a.row < b.row : a.col < b.col;
                   });
  std::vector<std::size_t> offsets(rows + 1, 0);
  std::vector<std::size_t> col_idx;
  std::vector<double> vals;
  col_idx.reserve(triplets.size());
  vals.reserve(triplets.size());
  for (std::size_t k = 0; k < triplets.size();) {
    const std::size_t r = triplets[k].row;
    const std::size_t c = triplets[k].col;
    double v = 0.0;
    for (; k < triplets.size() && triplets[k].row == r && triplets[k].col == c;
         ++k) {
      v += triplets[k].value;
    }
    if (v != 0.0) {
      col_idx.push_back(c);
      vals.push_back(v);
      ++offsets[r + 1];
    }
  }
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  SparseMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.row_offsets_ = std::move(offsets);
  m.col_indices_ = std::move(col_idx);
  m.values_ = std::move(vals);
  return m;
}

SparseMatrix SparseMatrix::from_csr(std::size_t rows, std::size_t cols,
                                    std::vector<std::size_t> row_offsets,
                                    std::vector<std::size_t> col_indices,
                                    std::vector<double> values) {
  if (row_offsets.size() != rows + 1 || row_offsets.front() != 0 ||
      row_offsets.back() != col_indices.size() ||
      col_indices.size() != values.size()) {
    throw ShapeError("SparseMatrix::from_csr: inconsistent array lengths");
  }
  for (std::size_t i = 0; i < rows; ++i) {
    if (row_offsets[i] > row_offsets[i + 1]) {
      throw ShapeError("SparseMatrix::from_csr: row offsets decrease at row " +
                       std::to_string(i));
    }
    for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p) {
      if (col_indices[p] >= cols ||
          (p > row_offsets[i] && col_indices[p] <= col_indices[p - 1])) {
        throw ShapeError(
            "SparseMatrix::from_csr: column indices out of range or unsorted "
            "in row " +
            std::to_string(i));
      }
    }
  }
  SparseMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.row_offsets_ = std::move(row_offsets);
  m.col_indices_ = std::move(col_indices);
  m.values_ = std::move(values);
  if (std::find(m.values_.begin(), m.values_.end(), 0.0) != m.values_.end()) {
    return m.with_values(m.values_);
  }
  return m;
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& dense) {
  std::vector<std::size_t> offsets(dense.rows() + 1, 0);
  std::vector<std::size_t> col_idx;
  std::vector<double> vals;
  for (std::size_t i = 0; i < dense.rows(); ++i) {
    for (std::size_t j = 0; j < dense.cols(); ++j) {
      if (dense(i, j) != 0.0) {
        col_idx.push_back(j);
        vals.push_back(dense(i, j));
      }
    }
    offsets[i + 1] = col_idx.size();
  }
  return from_csr(dense.rows(), dense.cols(), std::move(offsets),
                  std::move(col_idx), std::move(vals));
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<double> ones(n, 1.0);
  return diagonal(ones);
}

SparseMatrix SparseMatrix::diagonal(std::span<const double> diag) {
  const std::size_t n = diag.size();
  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<std::size_t> col_idx;
  std::vector<double> vals;
  for (std::size_t i = 0; i < n; ++i) {
    if (diag[i] != 0.0) {
      col_idx.push_back(i);
      vals.push_back(diag[i]);
    }
    offsets[i + 1] = col_idx.size();
  }
  return from_csr(n, n, std::move(offsets), std::move(col_idx),
                  std::move(vals));
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix d(rows_, cols_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
      d(i, col_indices_[p]) = values_[p];
    }
  }
  return d;
}

double SparseMatrix::at(std::size_t i, std::size_t j) const {
  if (i >= rows_ || j >= cols_) throw ShapeError("SparseMatrix::at: out of range");
  const auto cols = row_cols(i);
  const auto it = std::lower_bound(cols.begin(), cols.end(), j);
  if (it == cols.end() || *it != j) return 0.0;
  return values_[row_offsets_[i] + static_cast<std::size_t>(it - cols.begin())];
}

SparseMatrix SparseMatrix::with_values(std::vector<double> values) const {
  if (values.size() != values_.size()) {
    throw ShapeError("SparseMatrix::with_values: wrong value count");
  }
  std::vector<std::size_t> offsets(rows_ + 1, 0);
  std::vector<std::size_t> col_idx;
  std::vector<double> vals;
  col_idx.reserve(values.size());
  vals.reserve(values.size());
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
      if (values[p] != 0.0) {
        col_idx.push_back(col_indices_[p]);
        vals.push_back(values[p]);
      }
    }
    offsets[i + 1] = col_idx.size();
  }
  SparseMatrix m;
  m.rows_ = rows_;
  m.cols_ = cols_;
  m.row_offsets_ = std::move(offsets);
  m.col_indices_ = std::move(col_idx);
  m.values_ = std::move(vals);
  return m;
}

// ---------------------------------------------------------------------------
// Parallel kernels

DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& d) {
  require_inner(s.cols(), d.rows(), "spmm", s.rows(), d.cols());
  DenseMatrix out(s.rows(), d.cols());
  const auto n = static_cast<std::ptrdiff_t>(s.rows());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    auto out_row = out.row(i);
    const auto cols = s.row_cols(i);
    const auto vals = s.row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      const double v = vals[p];
      const auto in_row = d.row(cols[p]);
      for (std::size_t j = 0; j < out_row.size(); ++j) out_row[j] += v * in_row[j];
    }
  }
  return out;
}

DenseMatrix dense_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require_inner(a.cols(), b.rows(), "dense_matmul", a.rows(), b.cols());
  DenseMatrix out(a.rows(), b.cols());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    auto out_row = out.row(i);
    const auto a_row = a.row(i);
    for (std::size_t k = 0; k < a_row.size(); ++k) {
      const double v = a_row[k];
      const auto b_row = b.row(k);
      for (std::size_t j = 0; j < out_row.size(); ++j) out_row[j] += v * b_row[j];
    }
  }
  return out;
}

SparseMatrix sparse_matmul(const SparseMatrix& a, const SparseMatrix& b) {
  require_inner(a.cols(), b.rows(), "sparse_matmul", a.rows(), b.cols());
  std::vector<SparseRow> parts(a.rows());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel
  {
    std::vector<double> acc(b.cols(), 0.0);
    std::vector<char> touched(b.cols(), 0);
    std::vector<std::size_t> pattern;
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      pattern.clear();
      const auto a_cols = a.row_cols(i);
      const auto a_vals = a.row_values(i);
      for (std::size_t p = 0; p < a_cols.size(); ++p) {
        const auto b_cols = b.row_cols(a_cols[p]);
        const auto b_vals = b.row_values(a_cols[p]);
        for (std::size_t q = 0; q < b_cols.size(); ++q) {
          const std::size_t j = b_cols[q];
          if (!touched[j]) {
            touched[j] = 1;
            pattern.push_back(j);
          }
          acc[j] += a_vals[p] * b_vals[q];
        }
      }
      std::sort(pattern.begin(), pattern.end());
      SparseRow& row = parts[i];
      for (const std::size_t j : pattern) {
        if (acc[j] != 0.0) {
          row.cols.push_back(j);
          row.vals.push_back(acc[j]);
        }
        acc[j] = 0.0;
        touched[j] = 0;
      }
    }
  }
  return assemble_rows(a.rows(), b.cols(), parts);
}

// ---------------------------------------------------------------------------
// Elementwise helpers

DenseMatrix transpose(const DenseMatrix& m) {
  DenseMatrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  }
  return out;
}

SparseMatrix transpose(const SparseMatrix& m) {
  std::vector<std::size_t> offsets(m.cols() + 1, 0);
  for (const std::size_t c : m.col_indices()) ++offsets[c + 1];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  std::vector<std::size_t> next(offsets.begin(), offsets.end() - 1);
  std::vector<std::size_t> col_idx(m.nnz());
  std::vector<double> vals(m.nnz());
  // Rows are visited in ascending order, so each output row comes out sorted.
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto cols = m.row_cols(i);
    const auto v = m.row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      const std::size_t dst = next[cols[p]]++;
      col_idx[dst] = i;
      vals[dst] = v[p];
    }
  }
  return SparseMatrix::from_csr(m.cols(), m.rows(), std::move(offsets),
                                std::move(col_idx), std::move(vals));
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "add");
  DenseMatrix out = a;
  auto o = out.data();
  const auto bd = b.data();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] += bd[k];
  return out;
}

DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "subtract");
  DenseMatrix out = a;
  auto o = out.data();
  const auto bd = b.data();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] -= bd[k];
  return out;
}

DenseMatrix scale(const DenseMatrix& m, double factor) {
  DenseMatrix out = m;
  for (double& v : out.data()) v *= factor;
  return out;
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "hadamard");
  DenseMatrix out = a;
  auto o = out.data();
  const auto bd = b.data();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] *= bd[k];
  return out;
}

SparseMatrix add(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("sparse add: " + shape_str(a.rows(), a.cols()) + " vs " +
                     shape_str(b.rows(), b.cols()));
  }
  std::vector<SparseRow> parts(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ac = a.row_cols(i), bc = b.row_cols(i);
    const auto av = a.row_values(i), bv = b.row_values(i);
    std::size_t p = 0, q = 0;
    SparseRow& row = parts[i];
    while (p < ac.size() || q < bc.size()) {
      std::size_t j;
      double v;
      if (q == bc.size() || (p < ac.size() && ac[p] < bc[q])) {
        j = ac[p];
        v = av[p++];
      } else if (p == ac.size() || bc[q] < ac[p]) {
        j = bc[q];
        v = bv[q++];
      } else {
        j = ac[p];
        v = av[p++] + bv[q++];
      }
      if (v != 0.0) {
        row.cols.push_back(j);
        row.vals.push_back(v);
      }
    }
  }
  return assemble_rows(a.rows(), a.cols(), parts);
}

SparseMatrix scale(const SparseMatrix& m, double factor) {
  std::vector<double> vals(m.values().begin(), m.values().end());
  for (double& v : vals) v *= factor;
  return m.with_values(std::move(vals));
}

std::vector<double> row_sum(const DenseMatrix& m) {
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (const double v : m.row(i)) out[i] += v;
  }
  return out;
}

std::vector<double> row_sum(const SparseMatrix& m) {
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (const double v : m.row_values(i)) out[i] += v;
  }
  return out;
}

double frobenius_dot(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "frobenius_dot");
  double s = 0.0;
  const auto ad = a.data(), bd = b.data();
  for (std::size_t k = 0; k < ad.size(); ++k) s += ad[k] * bd[k];
  return s;
}

double sum_squares(const DenseMatrix& m) { return frobenius_dot(m, m); }

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  const auto ad = a.data(), bd = b.data();
  for (std::size_t k = 0; k < ad.size(); ++k) {
    worst = std::max(worst, std::abs(ad[k] - bd[k]));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Serial reference kernels

namespace reference {

DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& d) {
  require_inner(s.cols(), d.rows(), "reference::spmm", s.rows(), d.cols());
  DenseMatrix out(s.rows(), d.cols());
  const auto offsets = s.row_offsets();
  const auto cols = s.col_indices();
  const auto vals = s.values();
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = 0; j < d.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t p = offsets[i]; p < offsets[i + 1]; ++p) {
        acc += vals[p] * d(cols[p], j);
      }
      out(i, j) = acc;
    }
  }
  return out;
}

DenseMatrix dense_matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require_inner(a.cols(), b.rows(), "reference::dense_matmul", a.rows(),
                b.cols());
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
  return out;
}

SparseMatrix sparse_matmul(const SparseMatrix& a, const SparseMatrix& b) {
  require_inner(a.cols(), b.rows(), "reference::sparse_matmul", a.rows(),
                b.cols());
  std::vector<Triplet> entries;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto a_cols = a.row_cols(i);
    const auto a_vals = a.row_values(i);
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      bool any = false;
      for (std::size_t p = 0; p < a_cols.size(); ++p) {
        const double bv = b.at(a_cols[p], j);
        if (bv != 0.0) {
          acc += a_vals[p] * bv;
          any = true;
        }
      }
      if (any && acc != 0.0) entries.push_back({i, j, acc});
    }
  }
  return SparseMatrix::from_triplets(a.rows(), b.cols(), std::move(entries));
}

}  // namespace reference

}  // namespace gcn
