#include "susd/mat.hpp"

#include <cblas.h>
#include <malloc.h>

#include <cstdlib>

// OpenBLAS's dynamic dispatch falls back to generic SSE kernels when the CPU
// model string is masked (common under hypervisors). Hint the AVX-512 kernel
// family before the BLAS initializer runs; an explicit OPENBLAS_CORETYPE in
// the environment always wins. Priority 101 orders this ahead of the
// statically linked BLAS constructor.
#if defined(__x86_64__)
__attribute__((constructor(101))) static void hint_blas_coretype() {
  if (!std::getenv("OPENBLAS_CORETYPE") && __builtin_cpu_supports("avx512f") &&
      __builtin_cpu_supports("avx512dq") && __builtin_cpu_supports("avx512bw") &&
      __builtin_cpu_supports("avx512vl")) {
    setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 0);
  }
}
#endif

namespace susd {
namespace detail {

namespace {
struct RuntimeInit {
  RuntimeInit() {
    // One BLAS thread per call site; parallelism happens at the run/seed level.
    openblas_set_num_threads(1);
    // Tape buffers are a few hundred KB each and churn fast; keep them in the
    // arena instead of round-tripping through mmap.
    mallopt(M_MMAP_THRESHOLD, 64 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 64 * 1024 * 1024);
  }
};
const RuntimeInit runtime_init;
}  // namespace

void gemm_kernel(bool trans_a, bool trans_b, int m, int n, int k, const float* a,
                 int lda, const float* b, int ldb, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, 1.0f, a, lda, b, ldb,
              0.0f, c, ldc);
}

void gemm_kernel(bool trans_a, bool trans_b, int m, int n, int k, const double* a,
                 int lda, const double* b, int ldb, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, 1.0, a, lda, b, ldb,
              0.0, c, ldc);
}

}  // namespace detail
}  // namespace susd
