#include "iffsm/pgas.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "iffsm/numerics.hpp"

namespace iffsm {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
} // namespace

double importance_logweight(const cxd* y, const Constellation& cst, const GlobalParams& g,
                            std::span<const SymCode> win, double sigma_eff2, cxd* scratch) {
    return loglik_obs(y, cst, g, win, sigma_eff2, scratch);
}

void ancestor_logweights(const ObservationSet& Y, int t, const Constellation& cst,
                         const GlobalParams& g, double sigma_eff2, const SymCode* prev_rows,
                         const ParticleWindows& hist, std::span<const double> logw_prev,
                         const LatentMatrices& ref, std::span<double> out) {
    const int P = static_cast<int>(out.size());
    const int M = g.M(), L = g.L, D = Y.D, T = Y.T;
    if (t < 1 || t >= T) throw std::invalid_argument("ancestor_logweights: t out of range");
    if (static_cast<int>(logw_prev.size()) != P)
        throw std::invalid_argument("ancestor_logweights: weight size mismatch");
    const auto& K = kernels::active();

    // transition into the reference row, two-valued per chain
    std::vector<double> lp0(static_cast<std::size_t>(M)), lp1(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m) {
        const SymCode c = ref.at(t, m);
        lp0[m] = log_transition_code(0, c, g.a[m], g.b[m], cst);
        lp1[m] = log_transition_code(1, c, g.a[m], g.b[m], cst);
    }
    for (int p = 0; p < P; ++p) {
        const SymCode* prev = prev_rows + static_cast<std::size_t>(p) * M;
        double lw = logw_prev[p];
        for (int m = 0; m < M; ++m) lw += prev[m] ? lp1[m] : lp0[m];
        out[p] = lw;
    }
    if (L == 1) return;

    if (hist.P != P || hist.W != L - 1 || hist.M != M)
        throw std::invalid_argument("ancestor_logweights: window shape mismatch");
    // spliced corrections: windows of y_tau mix particle rows (< t) with
    // reference rows (>= t)
    std::vector<cxd> ref_mean(static_cast<std::size_t>(D));
    std::vector<cxd> mean(static_cast<std::size_t>(D));
    for (int tau = t; tau <= t + L - 2 && tau < T; ++tau) {
        std::fill(ref_mean.begin(), ref_mean.end(), cxd(0.0, 0.0));
        for (int r = t; r <= tau; ++r) {
            const int l = tau - r;
            const SymCode* row = ref.row(r);
            for (int m = 0; m < M; ++m)
                if (row[m])
                    K.caxpy(ref_mean.data(), g.tap(m, l), cst.value(row[m]),
                            static_cast<std::size_t>(D));
        }
        const double logc = -D * std::log(std::numbers::pi * sigma_eff2);
        const cxd* y = Y.row(tau);
        for (int p = 0; p < P; ++p) {
            std::copy(ref_mean.begin(), ref_mean.end(), mean.begin());
            for (int r = std::max(tau - L + 1, 0); r <= t - 1; ++r) {
                const int l = tau - r;
                const SymCode* row = hist.row(p, r - t + L - 1);
                for (int m = 0; m < M; ++m)
                    if (row[m])
                        K.caxpy(mean.data(), g.tap(m, l), cst.value(row[m]),
                                static_cast<std::size_t>(D));
            }
            const double r2 = K.residual_norm2(y, mean.data(), static_cast<std::size_t>(D));
            out[p] += logc - r2 / sigma_eff2;
        }
    }
}

LatentMatrices pgas_sweep(const ObservationSet& Y, const LatentMatrices& ref,
                          const Constellation& cst, const GlobalParams& g, double sigma_eff2,
                          const PgasOptions& opt, Rng& rng) {
    const int P = opt.particles, T = Y.T, M = g.M(), L = g.L, D = Y.D;
    if (P < 1) throw std::invalid_argument("pgas_sweep: need at least one particle");
    if (ref.T != T || ref.M != M) throw std::invalid_argument("pgas_sweep: reference shape mismatch");
    if (!(sigma_eff2 > 0.0)) throw std::invalid_argument("pgas_sweep: sigma_eff2 must be positive");
    LatentMatrices out(T, M);
    if (M == 0 || T == 0) return out;

    const int W = L - 1;
    const int Q = cst.size();
    std::vector<SymCode> xh(static_cast<std::size_t>(T) * P * M);
    std::vector<int> anc(static_cast<std::size_t>(T) * P, 0);
    ParticleWindows win(P, W, M), win_next(P, W, M);
    std::vector<double> logw(static_cast<std::size_t>(P)), logw_prev(static_cast<std::size_t>(P));
    std::vector<double> anc_lw(static_cast<std::size_t>(P));
    std::vector<cxd> scratch(static_cast<std::size_t>(D));
    std::vector<SymCode> winbuf(static_cast<std::size_t>(L) * M);
    const std::vector<SymCode> zero_row(static_cast<std::size_t>(M), 0);

    auto xrow = [&](int t, int p) -> SymCode* {
        return xh.data() + (static_cast<std::size_t>(t) * P + p) * M;
    };

    for (int t = 0; t < T; ++t) {
        int* anc_t = anc.data() + static_cast<std::size_t>(t) * P;
        if (t > 0) {
            std::swap(logw, logw_prev);
            try {
                const std::span<int> free_slots(anc_t, static_cast<std::size_t>(P > 1 ? P - 1 : 0));
                if (P > 1) {
                    if (opt.systematic)
                        resample_systematic(logw_prev, free_slots, rng);
                    else
                        resample_ancestors(logw_prev, free_slots, rng);
                }
                ancestor_logweights(Y, t, cst, g, sigma_eff2, xrow(t - 1, 0), win, logw_prev, ref,
                                    anc_lw);
                anc_t[P - 1] = sample_categorical_log(anc_lw, rng);
            } catch (const std::domain_error&) {
                throw std::runtime_error("pgas_sweep: degenerate particle weights at step " +
                                         std::to_string(t));
            }
        } else {
            for (int p = 0; p < P; ++p) anc_t[p] = p;
        }

        // propagate free particles from their ancestors, pin the last one
        for (int p = 0; p < P - 1; ++p) {
            const SymCode* prev = (t == 0) ? zero_row.data() : xrow(t - 1, anc_t[p]);
            SymCode* cur = xrow(t, p);
            for (int m = 0; m < M; ++m) {
                const double p_on = prev[m] ? g.b[m] : g.a[m];
                if (rng.bernoulli(p_on))
                    cur[m] = static_cast<SymCode>(1 + rng.uniform_int(static_cast<std::uint64_t>(Q)));
                else
                    cur[m] = 0;
            }
        }
        std::copy_n(ref.row(t), M, xrow(t, P - 1));

        // importance weights over the assembled windows
        const cxd* y = Y.row(t);
        double wmax = kNegInf;
        for (int p = 0; p < P; ++p) {
            std::span<const SymCode> window;
            if (W == 0) {
                window = std::span<const SymCode>(xrow(t, p), static_cast<std::size_t>(M));
            } else {
                const int a = anc_t[p];
                for (int w = 0; w < W; ++w)
                    std::copy_n(win.row(a, w), M, winbuf.data() + static_cast<std::size_t>(w) * M);
                std::copy_n(xrow(t, p), M, winbuf.data() + static_cast<std::size_t>(W) * M);
                window = winbuf;
            }
            logw[p] = loglik_obs(y, cst, g, window, sigma_eff2, scratch.data());
            wmax = std::max(wmax, logw[p]);
        }
        if (!std::isfinite(wmax))
            throw std::runtime_error("pgas_sweep: degenerate particle weights at step " +
                                     std::to_string(t));

        if (W > 0) {
            for (int p = 0; p < P; ++p) {
                const int a = anc_t[p];
                for (int w = 0; w + 1 < W; ++w)
                    std::copy_n(win.row(a, w + 1), M, win_next.row(p, w));
                std::copy_n(xrow(t, p), M, win_next.row(p, W - 1));
            }
            std::swap(win, win_next);
        }
    }

    // draw the output trajectory from the final weights
    int k;
    try {
        k = sample_categorical_log(logw, rng);
    } catch (const std::domain_error&) {
        throw std::runtime_error("pgas_sweep: degenerate particle weights at final step");
    }
    for (int t = T - 1; t >= 0; --t) {
        std::copy_n(xrow(t, k), M, out.row(t));
        k = anc[static_cast<std::size_t>(t) * P + k];
    }
    return out;
}

ObservationSet subtract_chains(const ObservationSet& Y, const LatentMatrices& latents,
                               const Constellation& cst, const GlobalParams& g,
                               std::span<const int> chains) {
    if (latents.M != g.M()) throw std::invalid_argument("subtract_chains: shape mismatch");
    ObservationSet out = Y;
    const auto& K = kernels::active();
    for (int t = 0; t < Y.T; ++t) {
        cxd* y = out.row(t);
        for (int l = 0; l < g.L && l <= t; ++l) {
            const SymCode* row = latents.row(t - l);
            for (int m : chains)
                if (row[m])
                    K.caxpy(y, g.tap(m, l), -cst.value(row[m]), static_cast<std::size_t>(Y.D));
        }
    }
    return out;
}

void pgas_sweep_block(const ObservationSet& Y, LatentMatrices& latents, const Constellation& cst,
                      const GlobalParams& g, double sigma_eff2, std::span<const int> block,
                      const PgasOptions& opt, Rng& rng) {
    if (latents.M != g.M()) throw std::invalid_argument("pgas_sweep_block: shape mismatch");
    std::vector<int> others;
    for (int m = 0; m < g.M(); ++m)
        if (std::find(block.begin(), block.end(), m) == block.end()) others.push_back(m);
    const ObservationSet Yres = subtract_chains(Y, latents, cst, g, others);

    GlobalParams sub;
    sub.L = g.L;
    sub.D = g.D;
    sub.sigma_l2 = g.sigma_l2;
    LatentMatrices subref(latents.T, static_cast<int>(block.size()));
    for (std::size_t j = 0; j < block.size(); ++j) {
        const int m = block[j];
        sub.append_chain(g.a[m], g.b[m],
                         std::span<const cxd>(g.tap(m, 0), static_cast<std::size_t>(g.L) * g.D));
        for (int t = 0; t < latents.T; ++t) subref.at(t, static_cast<int>(j)) = latents.at(t, m);
    }
    const LatentMatrices traj = pgas_sweep(Yres, subref, cst, sub, sigma_eff2, opt, rng);
    for (std::size_t j = 0; j < block.size(); ++j)
        for (int t = 0; t < latents.T; ++t) latents.at(t, block[j]) = traj.at(t, static_cast<int>(j));
}

int compact(LatentMatrices& latents, GlobalParams& g) {
    if (latents.M != g.M()) throw std::invalid_argument("compact: latents/globals mismatch");
    for (int m = latents.M - 1; m >= 0; --m) {
        if (!latents.column_nonzero(m)) {
            latents.remove_column(m);
            g.remove_chain(m);
        }
    }
    return latents.M;
}

} // namespace iffsm
