#include "ltr/matrix.hpp"

#include <cmath>

#include "ltr/rng.hpp"

namespace ltr {

bool Matrix::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Matrix::shape_str() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

Matrix identity(size_t n) {
  Matrix m(n, n);
  for (size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

Matrix random_matrix(size_t rows, size_t cols, double lo, double hi, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.next_uniform(lo, hi);
  return m;
}

}  // namespace ltr
