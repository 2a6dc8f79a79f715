#include "ice/matrix.hpp"

#include "ice/error.hpp"

namespace ice {

void matmul(const Mat& a, const Mat& b, Mat& out) {
  if (a.cols != b.rows) throw InvalidInput("matmul: inner dimension mismatch");
  out.rows = a.rows;
  out.cols = b.cols;
  out.data.assign(a.rows * b.cols, 0.0);
  // i-k-j order: the inner loop walks contiguous rows of b and out.
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* oi = out.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = ai[k];
      const double* bk = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) oi[j] += aik * bk[j];
    }
  }
}

void matmul_tn(const Mat& a, const Mat& b, Mat& out) {
  if (a.rows != b.rows) throw InvalidInput("matmul_tn: row count mismatch");
  out.rows = a.cols;
  out.cols = b.cols;
  out.data.assign(a.cols * b.cols, 0.0);
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* ak = a.row(k);
    const double* bk = b.row(k);
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = ak[i];
      double* oi = out.row(i);
      for (std::size_t j = 0; j < b.cols; ++j) oi[j] += aki * bk[j];
    }
  }
}

void matmul_nt(const Mat& a, const Mat& b, Mat& out) {
  if (a.cols != b.cols) throw InvalidInput("matmul_nt: column count mismatch");
  out.rows = a.rows;
  out.cols = b.rows;
  out.data.assign(a.rows * b.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* oi = out.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* bj = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
      oi[j] = acc;
    }
  }
}

}  // namespace ice
