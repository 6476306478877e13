#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace hmx {

using index_t = std::uint32_t;

/// Column-major dense matrix of 64-bit reals.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // rows*cols, column-major

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[j * rows + i]; }
  double operator()(std::size_t i, std::size_t j) const { return data[j * rows + i]; }

  double* col(std::size_t j) { return data.data() + j * rows; }
  const double* col(std::size_t j) const { return data.data() + j * rows; }

  bool operator==(const DenseMatrix&) const = default;
};

inline double frobenius_norm(const DenseMatrix& m) {
  double s = 0.0;
  for (double v : m.data) s += v * v;
  return std::sqrt(s);
}

/// C (m x n) += A (m x k) * B (k x n), all column-major with explicit leading
/// dimensions. Plain register-blocked kernel; pluggable point for an optimized
/// BLAS backend, all correctness tests run against this one.
void gemm_acc(std::size_t m, std::size_t n, std::size_t k,
              const double* a, std::size_t lda,
              const double* b, std::size_t ldb,
              double* c, std::size_t ldc);

/// C += A^T * B where A is (k x m) column-major, B (k x n), C (m x n).
void gemm_trans_acc(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, std::size_t lda,
                    const double* b, std::size_t ldb,
                    double* c, std::size_t ldc);

inline void matmul_acc(DenseMatrix& c, const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols)
    throw std::invalid_argument("matmul_acc: dimension mismatch");
  gemm_acc(a.rows, b.cols, a.cols, a.data.data(), a.rows, b.data.data(), b.rows,
           c.data.data(), c.rows);
}

}  // namespace hmx
