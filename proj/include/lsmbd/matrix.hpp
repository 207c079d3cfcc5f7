#ifndef LSMBD_MATRIX_HPP
#define LSMBD_MATRIX_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "lsmbd/conv.hpp"
#include "lsmbd/errors.hpp"

namespace lsmbd {

// Dense column-major matrix. Columns are the natural unit here (one column
// per channel/example), so column-major keeps each example contiguous.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return data[j * rows + i]; }
  double at(std::size_t i, std::size_t j) const { return data[j * rows + i]; }

  double* col(std::size_t j) { return data.data() + j * rows; }
  const double* col(std::size_t j) const { return data.data() + j * rows; }

  Signal col_vec(std::size_t j) const {
    return Signal(col(j), col(j) + rows);
  }
  void set_col(std::size_t j, const Signal& v) {
    if (v.size() != rows) throw DimensionError("Matrix::set_col: length mismatch");
    std::copy(v.begin(), v.end(), col(j));
  }
};

inline Signal matvec(const Matrix& m, const Signal& x) {
  if (x.size() != m.cols) throw DimensionError("matvec: dimension mismatch");
  Signal out(m.rows, 0.0);
  for (std::size_t j = 0; j < m.cols; ++j) {
    const double xj = x[j];
    const double* c = m.col(j);
    for (std::size_t i = 0; i < m.rows; ++i) out[i] += c[i] * xj;
  }
  return out;
}

inline Signal matvec_transpose(const Matrix& m, const Signal& y) {
  if (y.size() != m.rows) throw DimensionError("matvec_transpose: dimension mismatch");
  Signal out(m.cols);
  for (std::size_t j = 0; j < m.cols; ++j) {
    const double* c = m.col(j);
    double acc = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) acc += c[i] * y[i];
    out[j] = acc;
  }
  return out;
}

inline double frobenius_norm(const Matrix& m) {
  double acc = 0.0;
  for (double v : m.data) acc += v * v;
  return std::sqrt(acc);
}

}  // namespace lsmbd

#endif  // LSMBD_MATRIX_HPP
