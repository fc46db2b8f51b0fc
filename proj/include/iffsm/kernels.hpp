#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

namespace iffsm {

using cxd = std::complex<double>;

namespace kernels {

// acc[i] += h[i] * x for i in [0, n)
using caxpy_fn = void (*)(cxd* acc, const cxd* h, cxd x, std::size_t n);

// returns sum_i |y[i] - mean[i]|^2
using residual_fn = double (*)(const cxd* y, const cxd* mean, std::size_t n);

struct KernelSet {
    caxpy_fn caxpy;
    residual_fn residual_norm2;
    const char* name;
};

// Active set, chosen once: IFFSM_KERNEL env var if set ("scalar", "avx2",
// "neon"), otherwise the best variant this CPU supports.
const KernelSet& active();

// Override selection (tests). Throws std::invalid_argument if the variant
// is unknown or unsupported on this CPU.
void force(const std::string& name);

std::vector<std::string> available();

// Reference implementations, always present.
void caxpy_scalar(cxd* acc, const cxd* h, cxd x, std::size_t n);
double residual_norm2_scalar(const cxd* y, const cxd* mean, std::size_t n);

#if defined(__x86_64__) || defined(_M_X64)
bool cpu_has_avx2();
void caxpy_avx2(cxd* acc, const cxd* h, cxd x, std::size_t n);
double residual_norm2_avx2(const cxd* y, const cxd* mean, std::size_t n);
#endif

#if defined(__aarch64__)
void caxpy_neon(cxd* acc, const cxd* h, cxd x, std::size_t n);
double residual_norm2_neon(const cxd* y, const cxd* mean, std::size_t n);
#endif

} // namespace kernels
} // namespace iffsm
