#include "iffsm/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace iffsm::kernels {

// ==== scalar reference ======================================================

void caxpy_scalar(cxd* acc, const cxd* h, cxd x, std::size_t n) {
    const double xr = x.real(), xi = x.imag();
    for (std::size_t i = 0; i < n; ++i) {
        const double hr = h[i].real(), hi = h[i].imag();
        acc[i] += cxd(hr * xr - hi * xi, hr * xi + hi * xr);
    }
}

double residual_norm2_scalar(const cxd* y, const cxd* mean, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dr = y[i].real() - mean[i].real();
        const double di = y[i].imag() - mean[i].imag();
        s += dr * dr + di * di;
    }
    return s;
}

// ==== runtime selection =====================================================

namespace {

const KernelSet kScalar{&caxpy_scalar, &residual_norm2_scalar, "scalar"};

#if defined(__x86_64__) || defined(_M_X64)
const KernelSet kAvx2{&caxpy_avx2, &residual_norm2_avx2, "avx2"};
#endif
#if defined(__aarch64__)
const KernelSet kNeon{&caxpy_neon, &residual_norm2_neon, "neon"};
#endif

const KernelSet* find(const std::string& name) {
    if (name == "scalar") return &kScalar;
#if defined(__x86_64__) || defined(_M_X64)
    if (name == "avx2" && cpu_has_avx2()) return &kAvx2;
#endif
#if defined(__aarch64__)
    if (name == "neon") return &kNeon;
#endif
    return nullptr;
}

const KernelSet* pick_default() {
#if defined(__x86_64__) || defined(_M_X64)
    if (cpu_has_avx2()) return &kAvx2;
#endif
#if defined(__aarch64__)
    return &kNeon;
#endif
    return &kScalar;
}

const KernelSet* init_from_env() {
    if (const char* env = std::getenv("IFFSM_KERNEL")) {
        if (const KernelSet* k = find(env)) return k;
    }
    return pick_default();
}

const KernelSet* g_active = nullptr;

} // namespace

const KernelSet& active() {
    if (!g_active) g_active = init_from_env();
    return *g_active;
}

void force(const std::string& name) {
    const KernelSet* k = find(name);
    if (!k) throw std::invalid_argument("kernel variant unavailable: " + name);
    g_active = k;
}

std::vector<std::string> available() {
    std::vector<std::string> out{"scalar"};
#if defined(__x86_64__) || defined(_M_X64)
    if (cpu_has_avx2()) out.push_back("avx2");
#endif
#if defined(__aarch64__)
    out.push_back("neon");
#endif
    return out;
}

} // namespace iffsm::kernels
