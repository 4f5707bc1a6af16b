#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ltr {

/// Dense row-major matrix of doubles. Batches of per-item rows are stored as
/// (batch * list_size) x width, so the whole toolkit only ever needs 2-D.
struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& at(size_t r, size_t c) { return data[r * cols + c]; }
  double at(size_t r, size_t c) const { return data[r * cols + c]; }

  double* row(size_t r) { return data.data() + r * cols; }
  const double* row(size_t r) const { return data.data() + r * cols; }

  size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  bool all_finite() const;
  bool same_shape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }

  std::string shape_str() const;
};

/// Identity matrix of order n.
Matrix identity(size_t n);

/// Entries drawn uniformly from [lo, hi).
class Rng;
Matrix random_matrix(size_t rows, size_t cols, double lo, double hi, Rng& rng);

}  // namespace ltr
