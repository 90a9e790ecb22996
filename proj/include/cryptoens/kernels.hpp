#pragma once

#include <cstddef>

#include "cryptoens/exec.hpp"

// Dense row-major kernels used by the network. The parallel path splits work by output
// row and keeps the serial summation order for every element, so both paths are
// bit-identical.
namespace cryptoens::nn::kernels {

/// C[MxN] (+)= A[MxK] * B[KxN]
void matmul(Exec exec, const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n, bool accumulate);

/// C[MxN] (+)= A[MxK] * B^T, with B stored as [NxK]
void matmul_bt(Exec exec, const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate);

/// C[KxN] (+)= A^T * B, with A stored as [MxK] and B as [MxN]
void matmul_at(Exec exec, const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate);

/// out[N] (+)= column sums of A[MxN]
void colsum(Exec exec, const double* a, double* out, std::size_t m, std::size_t n, bool accumulate);

/// Each row of A[MxN] += bias[N]
void add_row_bias(Exec exec, double* a, const double* bias, std::size_t m, std::size_t n);

}  // namespace cryptoens::nn::kernels
