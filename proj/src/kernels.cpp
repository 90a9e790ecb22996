#include "cryptoens/kernels.hpp"

#include <algorithm>
#include <cstddef>

namespace cryptoens::nn::kernels {
namespace {

// Below this many output rows a parallel region costs more than it saves.
constexpr std::size_t kMinParallelRows = 32;

bool go_parallel(Exec exec, std::size_t rows) {
  return exec == Exec::Parallel && rows >= kMinParallelRows;
}

inline void matmul_row(const double* a, const double* b, double* c, std::size_t k, std::size_t n,
                       bool accumulate) {
  if (!accumulate) std::fill(c, c + n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a[p];
    const double* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
  }
}

inline void matmul_bt_row(const double* a, const double* b, double* c, std::size_t k,
                          std::size_t n, bool accumulate) {
  for (std::size_t j = 0; j < n; ++j) {
    const double* brow = b + j * k;
    double s = 0.0;
    for (std::size_t p = 0; p < k; ++p) s += a[p] * brow[p];
    c[j] = accumulate ? c[j] + s : s;
  }
}

}  // namespace

void matmul(Exec exec, const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (go_parallel(exec, m))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    matmul_row(a + r * k, b, c + r * n, k, n, accumulate);
  }
}

void matmul_bt(Exec exec, const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (go_parallel(exec, m))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    matmul_bt_row(a + r * k, b, c + r * n, k, n, accumulate);
  }
}

void matmul_at(Exec exec, const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + k * n, 0.0);
  if (go_parallel(exec, k)) {
    const auto krows = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t pi = 0; pi < krows; ++pi) {
      const auto p = static_cast<std::size_t>(pi);
      double* crow = c + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const double av = a[i * k + p];
        const double* brow = b + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
    return;
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void colsum(Exec exec, const double* a, double* out, std::size_t m, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(out, out + n, 0.0);
  if (go_parallel(exec, m) && n >= 8) {
    const auto cols = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ji = 0; ji < cols; ++ji) {
      const auto j = static_cast<std::size_t>(ji);
      double s = out[j];
      for (std::size_t i = 0; i < m; ++i) s += a[i * n + j];
      out[j] = s;
    }
    return;
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += a[i * n + j];
}

void add_row_bias(Exec exec, double* a, const double* bias, std::size_t m, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (go_parallel(exec, m))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* row = a + static_cast<std::size_t>(i) * n;
    for (std::size_t j = 0; j < n; ++j) row[j] += bias[j];
  }
}

}  // namespace cryptoens::nn::kernels
