#pragma once

#include "bdtf/tensor.hpp"

namespace bdtf::kern {

// C[m x n] = op(A) * op(B) (+C when accumulate). Logical dims: A is m x k, B is k x n;
// trans_a/trans_b flip the stored layout. Accumulation over k runs in ascending order in
// every variant, so serial and parallel results are bit-identical.
namespace serial {
void matmul(const double* a, const double* b, double* c, i64 m, i64 k, i64 n, bool trans_a,
            bool trans_b, bool accumulate);
}
namespace par {
void matmul(const double* a, const double* b, double* c, i64 m, i64 k, i64 n, bool trans_a,
            bool trans_b, bool accumulate);
}

// Dispatches to par unless already inside an OpenMP region or the problem is tiny.
void matmul(const double* a, const double* b, double* c, i64 m, i64 k, i64 n, bool trans_a,
            bool trans_b, bool accumulate);

void matmul(const Tensor& a, const Tensor& b, Tensor& c, i64 m, i64 k, i64 n, bool trans_a,
            bool trans_b, bool accumulate);

bool inside_parallel();

}  // namespace bdtf::kern
