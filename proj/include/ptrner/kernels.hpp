#pragma once
// Dense double-precision kernels used by the model's inner loops.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The active table is picked once at startup from the CPU
// features; PTRNER_ISA=scalar forces the reference path. All matrices are
// row-major and contiguous; gemm variants accumulate into C.

#include <cstddef>
#include <string_view>

namespace ptrner::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  Isa isa;
  const char* name;
  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // C(m x n) += A(m x k) * B(k x n)
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
  // C(m x n) += A(m x k) * B(n x k)^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
  // C(k x n) += A(m x k)^T * B(m x n)
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c);
};

const KernelTable& scalar_table();

// nullptr when the variant was not compiled in or the CPU lacks the features.
const KernelTable* avx2_table();

// The table selected at startup.
const KernelTable& active();

// Overrides the selection; returns false when the requested ISA is unavailable.
bool select(Isa isa);

std::string_view isa_name(Isa isa);

}  // namespace ptrner::kernels
