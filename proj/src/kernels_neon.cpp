// NEON variants, one complex double per 128-bit lane.

#include "iffsm/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace iffsm::kernels {

void caxpy_neon(cxd* acc, const cxd* h, cxd x, std::size_t n) {
    const float64x2_t xr = vdupq_n_f64(x.real());
    const double xi_signed[2] = {-x.imag(), x.imag()};
    const float64x2_t xi = vld1q_f64(xi_signed);
    double* a = reinterpret_cast<double*>(acc);
    const double* hp = reinterpret_cast<const double*>(h);
    for (std::size_t i = 0; i < n; ++i) {
        const float64x2_t v = vld1q_f64(hp + 2 * i);   // (re, im)
        const float64x2_t vs = vextq_f64(v, v, 1);     // (im, re)
        // (re*xr - im*xi, im*xr + re*xi)
        float64x2_t prod = vmulq_f64(v, xr);
        prod = vfmaq_f64(prod, vs, xi);
        const float64x2_t sum = vaddq_f64(vld1q_f64(a + 2 * i), prod);
        vst1q_f64(a + 2 * i, sum);
    }
}

double residual_norm2_neon(const cxd* y, const cxd* mean, std::size_t n) {
    const double* yp = reinterpret_cast<const double*>(y);
    const double* mp = reinterpret_cast<const double*>(mean);
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const float64x2_t d = vsubq_f64(vld1q_f64(yp + 2 * i), vld1q_f64(mp + 2 * i));
        acc = vfmaq_f64(acc, d, d);
    }
    return vaddvq_f64(acc);
}

} // namespace iffsm::kernels

#endif
