#include "traceforge/blas_env.hpp"

#include <cblas.h>
#include <cpuid.h>

#include <cstdint>
#include <cstdlib>

#include "traceforge/tensor.hpp"

extern "C" char* openblas_get_corename();

namespace traceforge {

namespace {

// Raw CPUID/XGETBV probing: this constructor runs before every other
// initializer (including the compiler's own cpu-model init), so the
// __builtin_cpu_supports machinery is not usable here.
bool os_supports(std::uint64_t xcr0_mask) {
  unsigned eax, ebx, ecx, edx;
  if (!__get_cpuid(1, &eax, &ebx, &ecx, &edx)) return false;
  if (!(ecx & (1u << 27))) return false;  // OSXSAVE
  std::uint32_t lo, hi;
  __asm__ volatile("xgetbv" : "=a"(lo), "=d"(hi) : "c"(0));
  const std::uint64_t xcr0 = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return (xcr0 & xcr0_mask) == xcr0_mask;
}

bool cpu_has_avx512() {
  unsigned eax, ebx, ecx, edx;
  if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return false;
  const unsigned need = (1u << 16) | (1u << 17) | (1u << 30) | (1u << 31);  // F, DQ, BW, VL
  if ((ebx & need) != need) return false;
  return os_supports(0xe6);  // xmm|ymm|opmask|zmm state
}

bool cpu_has_avx2_fma() {
  unsigned eax, ebx, ecx, edx;
  if (!__get_cpuid(1, &eax, &ebx, &ecx, &edx)) return false;
  if (!(ecx & (1u << 12))) return false;  // FMA
  if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return false;
  if (!(ebx & (1u << 5))) return false;  // AVX2
  return os_supports(0x6);  // xmm|ymm state
}

// Must run before OpenBLAS's own constructor reads OPENBLAS_CORETYPE.
// Priority 101 sorts ahead of default-priority constructors in .init_array,
// which is guaranteed once OpenBLAS is linked statically into the binary.
// OpenBLAS's model-based detection falls back to a generic kernel inside
// some hypervisors even though the feature flags are exposed.
__attribute__((constructor(101))) void select_blas_kernel() {
  if (std::getenv("OPENBLAS_CORETYPE") == nullptr) {
    if (cpu_has_avx512()) {
      setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 0);
    } else if (cpu_has_avx2_fma()) {
      setenv("OPENBLAS_CORETYPE", "HASWELL", 0);
    }
  }
  setenv("OPENBLAS_NUM_THREADS", "1", 0);
}

}  // namespace

const char* blas_kernel_name() { return openblas_get_corename(); }

namespace nn::detail {

// The GEMM wrappers live in this translation unit on purpose: any code that
// multiplies matrices pulls in this object file and with it the constructor
// above, even when the core library is linked statically.

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

}  // namespace nn::detail

}  // namespace traceforge
