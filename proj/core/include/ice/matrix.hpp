#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ice {

/// Dense row-major matrix of doubles. Deliberately minimal: the training
/// loop needs batched affine maps and their transposed products, nothing
/// more. All kernels accumulate each output element in a fixed order, so
/// results are reproducible bit-for-bit.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
  std::span<double> row_span(std::size_t i) { return {row(i), cols}; }
  std::span<const double> row_span(std::size_t i) const { return {row(i), cols}; }

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  void fill(double v) { data.assign(data.size(), v); }

  bool operator==(const Mat& other) const = default;
};

/// out = a * b. Shapes: (m x k) * (k x n) -> (m x n).
void matmul(const Mat& a, const Mat& b, Mat& out);

/// out = a^T * b. Shapes: (k x m)^T * (k x n) -> (m x n).
void matmul_tn(const Mat& a, const Mat& b, Mat& out);

/// out = a * b^T. Shapes: (m x k) * (n x k)^T -> (m x n).
void matmul_nt(const Mat& a, const Mat& b, Mat& out);

}  // namespace ice
