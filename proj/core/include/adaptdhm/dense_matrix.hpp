#pragma once

#include <cstddef>
#include <vector>

namespace adaptdhm {

// Row-major dense matrix of doubles. Everything trains in double precision so
// the finite-difference tolerances in the test suite hold.
struct DenseMatrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> values;

  DenseMatrix() = default;
  DenseMatrix(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& at(size_t r, size_t c) { return values[r * cols + c]; }
  double at(size_t r, size_t c) const { return values[r * cols + c]; }
  double* row(size_t r) { return values.data() + r * cols; }
  const double* row(size_t r) const { return values.data() + r * cols; }
  size_t size() const { return values.size(); }

  bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;
};

// out = a * b, shapes (n x k) * (k x m). Throws on mismatch.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

// L2 norm of one row.
double row_norm(const DenseMatrix& m, size_t r);

}  // namespace adaptdhm
