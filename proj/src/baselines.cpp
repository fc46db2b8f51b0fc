#include "iffsm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "iffsm/kernels.hpp"
#include "iffsm/numerics.hpp"

namespace iffsm {

namespace {

long long ipow(long long base, int exp) {
    long long r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

// p(code | previous activity): row 0 for an idle predecessor, row 1 for an
// active one.
struct TransRows {
    std::vector<double> idle, active;
};

TransRows transition_rows(double a, double b, int Q) {
    TransRows tr;
    tr.idle.resize(static_cast<std::size_t>(Q) + 1);
    tr.active.resize(static_cast<std::size_t>(Q) + 1);
    tr.idle[0] = 1.0 - a;
    tr.active[0] = 1.0 - b;
    for (int c = 1; c <= Q; ++c) {
        tr.idle[c] = a / Q;
        tr.active[c] = b / Q;
    }
    return tr;
}

// mean[s][d] = sum_l h^l * value(digit_l(s)) over the window states of one
// chain, digit 0 = most recent symbol.
std::vector<cxd> state_means(const Constellation& cst, const cxd* taps, int L, int D,
                             long long S) {
    const int Q1 = cst.size() + 1;
    std::vector<cxd> mean(static_cast<std::size_t>(S) * D, cxd(0.0, 0.0));
    const auto& k = kernels::active();
    for (long long s = 0; s < S; ++s) {
        cxd* row = mean.data() + static_cast<std::size_t>(s) * D;
        long long rem = s;
        for (int l = 0; l < L; ++l) {
            int c = static_cast<int>(rem % Q1);
            rem /= Q1;
            if (c != 0)
                k.caxpy(row, taps + static_cast<std::size_t>(l) * D,
                        cst.value(static_cast<SymCode>(c)), static_cast<std::size_t>(D));
        }
    }
    return mean;
}

// exp(loglik - max) per state for one observation row.
void emission_row(const cxd* y, const std::vector<cxd>& mean, long long S, int D, double sigma2,
                  double* out) {
    const auto& k = kernels::active();
    double mx = -std::numeric_limits<double>::infinity();
    for (long long s = 0; s < S; ++s) {
        double r2 = k.residual_norm2(y, mean.data() + static_cast<std::size_t>(s) * D, D);
        out[s] = -r2 / sigma2;
        mx = std::max(mx, out[s]);
    }
    for (long long s = 0; s < S; ++s) out[s] = std::exp(out[s] - mx);
}

void normalize_or_throw(double* v, long long n, const char* who) {
    double sum = std::accumulate(v, v + n, 0.0);
    if (!(sum > 0.0) || !std::isfinite(sum))
        throw std::runtime_error(std::string(who) + ": filter mass vanished");
    for (long long i = 0; i < n; ++i) v[i] /= sum;
}

} // namespace

GlobalParams genie_globals(const GenieConfig& cfg) {
    GlobalParams g;
    g.L = cfg.taps.L;
    g.D = cfg.taps.D;
    g.sigma_l2.assign(static_cast<std::size_t>(g.L), 1.0);
    for (int m = 0; m < cfg.taps.N; ++m) {
        std::span<const cxd> chain(cfg.taps.tap(m, 0), static_cast<std::size_t>(g.L) * g.D);
        g.append_chain(cfg.a, cfg.b, chain);
    }
    return g;
}

std::vector<LatentMatrices> genie_pgas(const ObservationSet& Y, const Constellation& cst,
                                       const GenieConfig& cfg, const PgasOptions& opt,
                                       int iters, int n_keep, Rng& rng) {
    if (iters <= 0 || n_keep <= 0 || n_keep > iters)
        throw std::invalid_argument("genie_pgas: need 0 < n_keep <= iters");
    GlobalParams g = genie_globals(cfg);
    LatentMatrices ref(Y.T, cfg.taps.N);
    std::vector<LatentMatrices> kept;
    kept.reserve(static_cast<std::size_t>(n_keep));
    for (int it = 0; it < iters; ++it) {
        ref = pgas_sweep(Y, ref, cst, g, cfg.sigma_y2, opt, rng);
        if (it >= iters - n_keep) kept.push_back(ref);
    }
    return kept;
}

void check_ffbs_cap(const Constellation& cst, int L, double cap) {
    const double Q1 = cst.size() + 1;
    if (2.0 * L * std::log(Q1) > std::log(cap))
        throw std::runtime_error(
            "ffbs: state budget (" + std::to_string(cst.size() + 1) + "^" + std::to_string(2 * L) +
            ") exceeds the cap of " + std::to_string(static_cast<long long>(cap)) +
            "; the exact recursion is infeasible for this alphabet and memory");
}

void ffbs_chain(const ObservationSet& Y, const Constellation& cst, const GlobalParams& g,
                int m, LatentMatrices& latents, double sigma_y2, Rng& rng) {
    const int T = Y.T, D = Y.D, L = g.L, Q1 = cst.size() + 1;
    if (latents.T != T || latents.M != g.M() || m < 0 || m >= g.M())
        throw std::invalid_argument("ffbs_chain: shape mismatch");
    const long long S = ipow(Q1, L);
    const long long Sprev = ipow(Q1, L - 1);

    std::vector<int> others;
    for (int j = 0; j < g.M(); ++j)
        if (j != m) others.push_back(j);
    ObservationSet resid = subtract_chains(Y, latents, cst, g, others);

    std::vector<cxd> mean = state_means(cst, g.tap(m, 0), L, D, S);
    TransRows tr = transition_rows(g.a[m], g.b[m], cst.size());

    std::vector<double> alpha(static_cast<std::size_t>(T) * S, 0.0);
    std::vector<double> emis(static_cast<std::size_t>(S));
    std::vector<double> pred(static_cast<std::size_t>(S));

    emission_row(resid.row(0), mean, S, D, sigma_y2, emis.data());
    for (int c = 0; c < Q1; ++c) alpha[static_cast<std::size_t>(c)] = tr.idle[c] * emis[c];
    normalize_or_throw(alpha.data(), S, "ffbs_chain");

    for (int t = 1; t < T; ++t) {
        const double* prev = alpha.data() + static_cast<std::size_t>(t - 1) * S;
        std::fill(pred.begin(), pred.end(), 0.0);
        for (long long s = 0; s < S; ++s) {
            double w = prev[s];
            if (w == 0.0) continue;
            const double* row = (s % Q1) != 0 ? tr.active.data() : tr.idle.data();
            long long base = (s % Sprev) * Q1;
            for (int c = 0; c < Q1; ++c) pred[base + c] += w * row[c];
        }
        emission_row(resid.row(t), mean, S, D, sigma_y2, emis.data());
        double* cur = alpha.data() + static_cast<std::size_t>(t) * S;
        for (long long s = 0; s < S; ++s) cur[s] = pred[s] * emis[s];
        normalize_or_throw(cur, S, "ffbs_chain");
    }

    std::vector<double> w(static_cast<std::size_t>(Q1));
    std::span<const double> last(alpha.data() + static_cast<std::size_t>(T - 1) * S,
                                 static_cast<std::size_t>(S));
    long long e = static_cast<long long>(sample_categorical(last, rng));
    latents.at(T - 1, m) = static_cast<SymCode>(e % Q1);
    for (int t = T - 2; t >= 0; --t) {
        const double* cur = alpha.data() + static_cast<std::size_t>(t) * S;
        const long long head = e / Q1; // digits 0..L-2 of the predecessor
        const int c_next = static_cast<int>(e % Q1);
        for (int c = 0; c < Q1; ++c) {
            long long cand = head + static_cast<long long>(c) * Sprev;
            const double* row = (cand % Q1) != 0 ? tr.active.data() : tr.idle.data();
            w[static_cast<std::size_t>(c)] = cur[cand] * row[c_next];
        }
        double sum = std::accumulate(w.begin(), w.end(), 0.0);
        if (!(sum > 0.0)) throw std::runtime_error("ffbs_chain: backward mass vanished");
        for (double& x : w) x /= sum;
        int c = sample_categorical(w, rng);
        e = (e / Q1) + static_cast<long long>(c) * Sprev;
        latents.at(t, m) = static_cast<SymCode>(e % Q1);
    }
}

std::vector<LatentMatrices> genie_ffbs(const ObservationSet& Y, const Constellation& cst,
                                       const GenieConfig& cfg, int iters, int n_keep, Rng& rng) {
    if (iters <= 0 || n_keep <= 0 || n_keep > iters)
        throw std::invalid_argument("genie_ffbs: need 0 < n_keep <= iters");
    check_ffbs_cap(cst, cfg.taps.L, cfg.state_cap);
    GlobalParams g = genie_globals(cfg);
    LatentMatrices latents(Y.T, cfg.taps.N);
    std::vector<LatentMatrices> kept;
    kept.reserve(static_cast<std::size_t>(n_keep));
    for (int it = 0; it < iters; ++it) {
        for (int m = 0; m < g.M(); ++m) ffbs_chain(Y, cst, g, m, latents, cfg.sigma_y2, rng);
        if (it >= iters - n_keep) kept.push_back(latents);
    }
    return kept;
}

BcjrResult bcjr_joint(const ObservationSet& Y, const Constellation& cst, const GenieConfig& cfg) {
    const int T = Y.T, D = Y.D, L = cfg.taps.L, N = cfg.taps.N, Q1 = cst.size() + 1;
    if (2.0 * L * N * std::log(static_cast<double>(Q1)) > std::log(cfg.state_cap))
        throw std::runtime_error(
            "bcjr: state budget (" + std::to_string(Q1) + "^" + std::to_string(2 * L * N) +
            ") exceeds the cap of " + std::to_string(static_cast<long long>(cfg.state_cap)) +
            "; the exact joint recursion is infeasible for this scenario");
    if (T <= 0 || N <= 0) throw std::invalid_argument("bcjr: empty scenario");

    const long long Sc = ipow(Q1, L);          // per-chain window states
    const long long S = ipow(Q1, L * N);       // joint states, chain-major
    const long long combos = ipow(Q1, N);      // joint code choices per step
    const long long Sprev = ipow(Q1, L - 1);

    // Joint per-state means via the per-chain tables.
    std::vector<std::vector<cxd>> cmean(static_cast<std::size_t>(N));
    for (int m = 0; m < N; ++m) cmean[m] = state_means(cst, cfg.taps.tap(m, 0), L, D, Sc);
    std::vector<cxd> mean(static_cast<std::size_t>(S) * D, cxd(0.0, 0.0));
    for (long long s = 0; s < S; ++s) {
        cxd* row = mean.data() + static_cast<std::size_t>(s) * D;
        long long rem = s;
        for (int m = 0; m < N; ++m) {
            long long e = rem % Sc;
            rem /= Sc;
            const cxd* src = cmean[m].data() + static_cast<std::size_t>(e) * D;
            for (int d = 0; d < D; ++d) row[d] += src[d];
        }
    }

    TransRows tr = transition_rows(cfg.a, cfg.b, cst.size());

    std::vector<double> emis(static_cast<std::size_t>(T) * S);
    for (int t = 0; t < T; ++t)
        emission_row(Y.row(t), mean, S, D, cfg.sigma_y2,
                     emis.data() + static_cast<std::size_t>(t) * S);

    // Chain-major digit helpers shared by both recursions: from joint state
    // s, choosing joint combo k leads to shift_state(s, codes).
    std::vector<long long> pw(static_cast<std::size_t>(N));
    for (int m = 0; m < N; ++m) pw[m] = ipow(Q1, L * m);
    auto chain_digit0 = [&](long long s, int m) { return static_cast<int>((s / pw[m]) % Q1); };
    auto shift_state = [&](long long s, const int* codes) {
        long long out = 0;
        long long rem = s;
        for (int m = 0; m < N; ++m) {
            long long e = rem % Sc;
            rem /= Sc;
            out += (codes[m] + (e % Sprev) * Q1) * pw[m];
        }
        return out;
    };

    std::vector<int> codes(static_cast<std::size_t>(N));
    std::vector<double> alpha(static_cast<std::size_t>(T) * S, 0.0);
    std::vector<double> beta(static_cast<std::size_t>(T) * S, 0.0);

    // t = 0: every chain window must contain only the initial symbol.
    for (long long k = 0; k < combos; ++k) {
        long long rem = k;
        double p = 1.0;
        long long s = 0;
        for (int m = 0; m < N; ++m) {
            int c = static_cast<int>(rem % Q1);
            rem /= Q1;
            p *= tr.idle[c];
            s += static_cast<long long>(c) * pw[m];
        }
        alpha[static_cast<std::size_t>(s)] = p * emis[static_cast<std::size_t>(s)];
    }
    normalize_or_throw(alpha.data(), S, "bcjr");

    for (int t = 1; t < T; ++t) {
        const double* prev = alpha.data() + static_cast<std::size_t>(t - 1) * S;
        double* cur = alpha.data() + static_cast<std::size_t>(t) * S;
        const double* em = emis.data() + static_cast<std::size_t>(t) * S;
        for (long long s = 0; s < S; ++s) {
            double w = prev[s];
            if (w == 0.0) continue;
            for (long long k = 0; k < combos; ++k) {
                long long rem = k;
                double p = w;
                for (int m = 0; m < N; ++m) {
                    int c = static_cast<int>(rem % Q1);
                    rem /= Q1;
                    codes[m] = c;
                    p *= chain_digit0(s, m) != 0 ? tr.active[c] : tr.idle[c];
                }
                cur[shift_state(s, codes.data())] += p;
            }
        }
        for (long long s = 0; s < S; ++s) cur[s] *= em[s];
        normalize_or_throw(cur, S, "bcjr");
    }

    double* blast = beta.data() + static_cast<std::size_t>(T - 1) * S;
    std::fill(blast, blast + S, 1.0);
    for (int t = T - 2; t >= 0; --t) {
        const double* nxt = beta.data() + static_cast<std::size_t>(t + 1) * S;
        const double* em = emis.data() + static_cast<std::size_t>(t + 1) * S;
        double* cur = beta.data() + static_cast<std::size_t>(t) * S;
        for (long long s = 0; s < S; ++s) {
            double acc = 0.0;
            for (long long k = 0; k < combos; ++k) {
                long long rem = k;
                double p = 1.0;
                for (int m = 0; m < N; ++m) {
                    int c = static_cast<int>(rem % Q1);
                    rem /= Q1;
                    codes[m] = c;
                    p *= chain_digit0(s, m) != 0 ? tr.active[c] : tr.idle[c];
                }
                long long sn = shift_state(s, codes.data());
                acc += p * em[sn] * nxt[sn];
            }
            cur[s] = acc;
        }
        normalize_or_throw(cur, S, "bcjr");
    }

    BcjrResult res;
    res.T = T;
    res.N = N;
    res.Q1 = Q1;
    res.marginals.assign(static_cast<std::size_t>(T) * N * Q1, 0.0);
    res.map = LatentMatrices(T, N);
    std::vector<double> gamma(static_cast<std::size_t>(S));
    for (int t = 0; t < T; ++t) {
        const double* a = alpha.data() + static_cast<std::size_t>(t) * S;
        const double* b = beta.data() + static_cast<std::size_t>(t) * S;
        for (long long s = 0; s < S; ++s) gamma[static_cast<std::size_t>(s)] = a[s] * b[s];
        normalize_or_throw(gamma.data(), S, "bcjr");
        double* marg = res.marginals.data() + static_cast<std::size_t>(t) * N * Q1;
        for (long long s = 0; s < S; ++s) {
            if (gamma[static_cast<std::size_t>(s)] == 0.0) continue;
            for (int m = 0; m < N; ++m)
                marg[static_cast<std::size_t>(m) * Q1 + chain_digit0(s, m)] +=
                    gamma[static_cast<std::size_t>(s)];
        }
        for (int m = 0; m < N; ++m) {
            const double* row = marg + static_cast<std::size_t>(m) * Q1;
            int best = 0;
            for (int c = 1; c < Q1; ++c)
                if (row[c] > row[best]) best = c;
            res.map.at(t, m) = static_cast<SymCode>(best);
        }
    }
    return res;
}

} // namespace iffsm
