#include "iffsm/mibp.hpp"

#include <cmath>
#include <stdexcept>

#include "iffsm/numerics.hpp"

namespace iffsm {

double active_a_min(const GlobalParams& g) {
    double a_min = 1.0;
    for (double a : g.a) a_min = std::min(a_min, a);
    return a_min;
}

double draw_slice(double a_min, SliceMode mode, int T, Rng& rng) {
    if (!(a_min > 0.0) || a_min > 1.0)
        throw std::invalid_argument("draw_slice: a_min must lie in (0, 1]");
    if (T < 1) throw std::invalid_argument("draw_slice: T must be >= 1");
    switch (mode) {
    case SliceMode::power: {
        const double u = rng.u01();
        return u * u * u * u / static_cast<double>(T);
    }
    case SliceMode::beta:
        return a_min * rng.beta(1.0, 5.0);
    case SliceMode::uniform:
    default:
        return rng.uniform(0.0, a_min);
    }
}

std::pair<double, double> birth_logdensity_u(double u, double alpha, int T) {
    const double a = std::exp(u);
    if (!(a > 0.0) || a >= 1.0) {
        if (a >= 1.0) return {-std::numeric_limits<double>::infinity(), -1e308};
        return {-std::numeric_limits<double>::infinity(), alpha};
    }
    const double q = 1.0 - a;
    double s = 0.0, qt = 1.0;
    for (int t = 1; t <= T; ++t) {
        qt *= q;
        s += qt / t;
    }
    const double logf = alpha * s + alpha * u + T * std::log1p(-a);
    const double dlogf = alpha * std::pow(q, T) - T * a / q;
    return {logf, dlogf};
}

BirthResult extend_chains(LatentMatrices& latents, GlobalParams& g, const Hyperparams& hyper,
                          double theta, Rng& rng, int max_total, double upper) {
    if (latents.M != g.M()) throw std::invalid_argument("extend_chains: latents/globals mismatch");
    if (!(theta > 0.0)) throw std::invalid_argument("extend_chains: theta must be positive");
    if (upper < 0.0 || upper > 1.0)
        throw std::invalid_argument("extend_chains: upper must lie in [0, 1]");
    constexpr int kSafetyCap = 1000;
    const int T = latents.T;
    const double alpha = hyper.alpha;

    BirthResult res;
    double a_prev = upper > 0.0 ? upper : active_a_min(g);
    std::vector<cxd> chain_taps(static_cast<std::size_t>(g.L) * g.D);
    for (int k = 0; k < kSafetyCap; ++k) {
        if (max_total > 0 && g.M() >= max_total) break;
        bool fell_back = false;
        const double u = ars_sample_logconcave(
            [&](double v) { return birth_logdensity_u(v, alpha, T); },
            -std::numeric_limits<double>::infinity(), std::log(a_prev), rng, &fell_back);
        if (fell_back) ++res.ars_fallbacks;
        const double a_new = std::exp(u);
        if (a_new < theta) return res;
        for (int l = 0; l < g.L; ++l)
            sample_cgauss(chain_taps.data() + static_cast<std::size_t>(l) * g.D, nullptr,
                          g.sigma_l2[static_cast<std::size_t>(l)], static_cast<std::size_t>(g.D),
                          rng);
        g.append_chain(a_new, rng.beta(hyper.beta0, hyper.beta1), chain_taps);
        latents.append_zero_column();
        ++res.n_born;
        a_prev = a_new;
    }
    if (max_total > 0 && g.M() >= max_total) return res;
    throw std::runtime_error("extend_chains: birth loop exceeded safety cap");
}

} // namespace iffsm
