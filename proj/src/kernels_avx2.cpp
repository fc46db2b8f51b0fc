// AVX2 variants of the complex vector kernels. This translation unit is the
// only one compiled with -mavx2 -mfma; callers reach it through the runtime
// dispatch in kernels.cpp.

#include "iffsm/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace iffsm::kernels {

bool cpu_has_avx2() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

// Two complex doubles per 256-bit lane, interleaved (re, im, re, im).
void caxpy_avx2(cxd* acc, const cxd* h, cxd x, std::size_t n) {
    const __m256d xr = _mm256_set1_pd(x.real());
    const __m256d xi = _mm256_set1_pd(x.imag());
    double* a = reinterpret_cast<double*>(acc);
    const double* hp = reinterpret_cast<const double*>(h);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d v = _mm256_loadu_pd(hp + 2 * i);
        const __m256d vs = _mm256_permute_pd(v, 0x5); // (im, re) per complex
        const __m256d t = _mm256_mul_pd(vs, xi);
        // even lanes: re*xr - im*xi, odd lanes: im*xr + re*xi
        const __m256d prod = _mm256_addsub_pd(_mm256_mul_pd(v, xr), t);
        const __m256d sum = _mm256_add_pd(_mm256_loadu_pd(a + 2 * i), prod);
        _mm256_storeu_pd(a + 2 * i, sum);
    }
    if (i < n) caxpy_scalar(acc + i, h + i, x, n - i);
}

double residual_norm2_avx2(const cxd* y, const cxd* mean, std::size_t n) {
    const double* yp = reinterpret_cast<const double*>(y);
    const double* mp = reinterpret_cast<const double*>(mean);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d d =
            _mm256_sub_pd(_mm256_loadu_pd(yp + 2 * i), _mm256_loadu_pd(mp + 2 * i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    __m128d lo = _mm256_castpd256_pd128(acc);
    __m128d hi = _mm256_extractf128_pd(acc, 1);
    lo = _mm_add_pd(lo, hi);
    double s = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
    if (i < n) s += residual_norm2_scalar(y + i, mean + i, n - i);
    return s;
}

} // namespace iffsm::kernels

#endif
