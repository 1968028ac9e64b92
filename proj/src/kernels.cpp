#include "bdtf/kernels.hpp"

#include <cassert>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bdtf::kern {

namespace {

inline i64 idx_a(i64 i, i64 p, i64 m, i64 k, bool trans) { return trans ? p * m + i : i * k + p; }
inline i64 idx_b(i64 p, i64 j, i64 k, i64 n, bool trans) { return trans ? j * k + p : p * n + j; }

inline void row_product(const double* a, const double* b, double* c, i64 i, i64 m, i64 k, i64 n,
                        bool trans_a, bool trans_b, bool accumulate) {
  double* crow = c + i * n;
  if (!accumulate) {
    for (i64 j = 0; j < n; ++j) crow[j] = 0.0;
  }
  // k ascending per output element; matches the serial reference bit-for-bit.
  for (i64 p = 0; p < k; ++p) {
    const double av = a[idx_a(i, p, m, k, trans_a)];
    if (!trans_b) {
      const double* brow = b + p * n;
      for (i64 j = 0; j < n; ++j) crow[j] += av * brow[j];
    } else {
      for (i64 j = 0; j < n; ++j) crow[j] += av * b[j * k + p];
    }
  }
}

}  // namespace

namespace serial {
void matmul(const double* a, const double* b, double* c, i64 m, i64 k, i64 n, bool trans_a,
            bool trans_b, bool accumulate) {
  for (i64 i = 0; i < m; ++i) {
    double* crow = c + i * n;
    if (!accumulate)
      for (i64 j = 0; j < n; ++j) crow[j] = 0.0;
    for (i64 p = 0; p < k; ++p) {
      const double av = a[idx_a(i, p, m, k, trans_a)];
      for (i64 j = 0; j < n; ++j) crow[j] += av * b[idx_b(p, j, k, n, trans_b)];
    }
  }
}
}  // namespace serial

namespace par {
void matmul(const double* a, const double* b, double* c, i64 m, i64 k, i64 n, bool trans_a,
            bool trans_b, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < m; ++i) row_product(a, b, c, i, m, k, n, trans_a, trans_b, accumulate);
}
}  // namespace par

bool inside_parallel() {
#ifdef _OPENMP
  return omp_in_parallel() != 0;
#else
  return false;
#endif
}

void matmul(const double* a, const double* b, double* c, i64 m, i64 k, i64 n, bool trans_a,
            bool trans_b, bool accumulate) {
  const i64 work = m * k * n;
  if (inside_parallel() || work < 16384) {
    serial::matmul(a, b, c, m, k, n, trans_a, trans_b, accumulate);
  } else {
    par::matmul(a, b, c, m, k, n, trans_a, trans_b, accumulate);
  }
}

void matmul(const Tensor& a, const Tensor& b, Tensor& c, i64 m, i64 k, i64 n, bool trans_a,
            bool trans_b, bool accumulate) {
  assert(a.size() == m * k && b.size() == k * n && c.size() == m * n);
  matmul(a.data.data(), b.data.data(), c.data.data(), m, k, n, trans_a, trans_b, accumulate);
}

}  // namespace bdtf::kern
