#include "adaptdhm/dense_matrix.hpp"

#include <cmath>

#include "adaptdhm/error.hpp"

namespace adaptdhm {

bool DenseMatrix::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.rows)
    fail("matmul: inner dimensions differ (" + std::to_string(a.cols) + " vs " + std::to_string(b.rows) + ")");
  DenseMatrix out(a.rows, b.cols, 0.0);
  for (size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (size_t k = 0; k < a.cols; ++k) {
      const double av = arow[k];
      if (av == 0.0) continue;
      const double* brow = b.row(k);
      for (size_t j = 0; j < b.cols; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

double row_norm(const DenseMatrix& m, size_t r) {
  double s = 0.0;
  const double* p = m.row(r);
  for (size_t c = 0; c < m.cols; ++c) s += p[c] * p[c];
  return std::sqrt(s);
}

}  // namespace adaptdhm
