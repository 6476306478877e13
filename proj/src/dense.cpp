#include "hmx/dense.hpp"

namespace hmx {
namespace {

// Tile sizes chosen for a typical 32K L1 / 256K L2; nothing here is tuned per
// machine, the kernel just avoids the worst strides.
constexpr std::size_t kMc = 64;
constexpr std::size_t kKc = 256;

}  // namespace

void gemm_acc(std::size_t m, std::size_t n, std::size_t k,
              const double* a, std::size_t lda,
              const double* b, std::size_t ldb,
              double* c, std::size_t ldc) {
  for (std::size_t kk = 0; kk < k; kk += kKc) {
    const std::size_t kb = std::min(kKc, k - kk);
    for (std::size_t ii = 0; ii < m; ii += kMc) {
      const std::size_t mb = std::min(kMc, m - ii);
      for (std::size_t j = 0; j < n; ++j) {
        const double* bj = b + j * ldb + kk;
        double* cj = c + j * ldc + ii;
        std::size_t p = 0;
        // 4-way unrolled rank-1 updates on a column stripe of C
        for (; p + 4 <= kb; p += 4) {
          const double b0 = bj[p], b1 = bj[p + 1], b2 = bj[p + 2], b3 = bj[p + 3];
          const double* a0 = a + (kk + p) * lda + ii;
          const double* a1 = a0 + lda;
          const double* a2 = a1 + lda;
          const double* a3 = a2 + lda;
          for (std::size_t i = 0; i < mb; ++i)
            cj[i] += a0[i] * b0 + a1[i] * b1 + a2[i] * b2 + a3[i] * b3;
        }
        for (; p < kb; ++p) {
          const double bp = bj[p];
          const double* ap = a + (kk + p) * lda + ii;
          for (std::size_t i = 0; i < mb; ++i) cj[i] += ap[i] * bp;
        }
      }
    }
  }
}

void gemm_trans_acc(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, std::size_t lda,
                    const double* b, std::size_t ldb,
                    double* c, std::size_t ldc) {
  // C(i,j) += dot(A(:,i), B(:,j)); columns of A are contiguous so the dot is a
  // unit-stride reduction.
  for (std::size_t j = 0; j < n; ++j) {
    const double* bj = b + j * ldb;
    double* cj = c + j * ldc;
    for (std::size_t i = 0; i < m; ++i) {
      const double* ai = a + i * lda;
      double s0 = 0.0, s1 = 0.0;
      std::size_t p = 0;
      for (; p + 2 <= k; p += 2) {
        s0 += ai[p] * bj[p];
        s1 += ai[p + 1] * bj[p + 1];
      }
      if (p < k) s0 += ai[p] * bj[p];
      cj[i] += s0 + s1;
    }
  }
}

}  // namespace hmx
