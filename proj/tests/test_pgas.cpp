// Conditional particle filter with ancestor sampling: pinning, exact
// posterior marginals on enumerable toys, ancestor-weight formula against a
// brute-force spliced-density computation, and the helper routines.

#include "check.hpp"
#include "iffsm/model.hpp"
#include "iffsm/numerics.hpp"
#include "iffsm/pgas.hpp"
#include "iffsm/rng.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

using namespace iffsm;

namespace {

GlobalParams toy_globals(int L, int D, const std::vector<double>& a, const std::vector<double>& b,
                         const std::vector<cxd>& taps_flat) {
    GlobalParams g;
    g.L = L;
    g.D = D;
    g.sigma_l2.assign(static_cast<std::size_t>(L), 1.0);
    const std::size_t per = static_cast<std::size_t>(L) * D;
    for (std::size_t m = 0; m < a.size(); ++m)
        g.append_chain(a[m], b[m],
                       std::span<const cxd>(taps_flat.data() + m * per, per));
    return g;
}

// Empirical symbol marginals of a Markov chain of sweeps, compared against
// exact enumeration. Returns the worst absolute marginal error.
double sweep_marginal_gap(const ObservationSet& Y, const Constellation& cst,
                          const GlobalParams& g, double sigma2, int sweeps, int burn,
                          const LatentMatrices& start, Rng& rng) {
    const oracle::Enumeration post = oracle::enumerate_posterior(Y, cst, g, sigma2);
    const int Q1 = static_cast<int>(cst.size()) + 1;
    PgasOptions opt;
    opt.particles = 30;
    LatentMatrices ref = start;
    std::vector<std::vector<double>> freq(
        static_cast<std::size_t>(Y.T) * g.M(), std::vector<double>(Q1, 0.0));
    int kept = 0;
    for (int r = 0; r < sweeps; ++r) {
        ref = pgas_sweep(Y, ref, cst, g, sigma2, opt, rng);
        if (r < burn) continue;
        ++kept;
        for (int t = 0; t < Y.T; ++t)
            for (int m = 0; m < g.M(); ++m)
                freq[static_cast<std::size_t>(t) * g.M() + m][ref.at(t, m)] += 1.0;
    }
    double worst = 0.0;
    for (int t = 0; t < Y.T; ++t)
        for (int m = 0; m < g.M(); ++m)
            for (int c = 0; c < Q1; ++c) {
                const double est =
                    freq[static_cast<std::size_t>(t) * g.M() + m][c] / kept;
                worst = std::max(worst, std::abs(est - post.marginal(t, m, c)));
            }
    return worst;
}

}  // namespace

static void pinning() {
    // With a single particle the sweep must return the reference unchanged:
    // that particle is pinned to the reference at every step.
    Rng rng(41);
    const Constellation bpsk = Constellation::named("bpsk");
    const GlobalParams g = toy_globals(1, 2, {0.3}, {0.8}, {cxd(1, 0), cxd(0, -1)});
    LatentMatrices ref(5, 1);
    ref.at(1, 0) = 2;
    ref.at(2, 0) = 1;
    ref.at(4, 0) = 1;
    ObservationSet Y(5, 2);
    for (auto& v : Y.data) v = cxd(rng.normal(), rng.normal());
    PgasOptions opt;
    opt.particles = 1;
    const LatentMatrices out = pgas_sweep(Y, ref, bpsk, g, 1.0, opt, rng);
    checks::check(out.x == ref.x, "a single pinned particle reproduces the reference");
}

static void toy_marginals_memoryless() {
    Rng rng(42);
    const Constellation bpsk = Constellation::named("bpsk");
    const GlobalParams g = toy_globals(1, 1, {0.4}, {0.7}, {cxd(1.0, 0.3)});

    // Data drawn from the model itself so the posterior is well spread.
    LatentMatrices truth(4, 1);
    truth.at(1, 0) = 1;
    truth.at(2, 0) = 2;
    ObservationSet Y(4, 1);
    const double sigma2 = 0.6;
    for (int t = 0; t < 4; ++t) {
        const cxd mean = truth.at(t, 0) ? bpsk.value(truth.at(t, 0)) * g.tap(0, 0)[0] : cxd(0, 0);
        Y.row(t)[0] = mean + std::sqrt(0.5 * sigma2) * cxd(rng.normal(), rng.normal());
    }

    LatentMatrices idle(4, 1);
    const double gap_idle = sweep_marginal_gap(Y, bpsk, g, sigma2, 8000, 500, idle, rng);
    checks::check_lt(gap_idle, 0.02, "sweep marginals match enumeration (idle start, L=1)");

    LatentMatrices busy(4, 1);
    for (int t = 0; t < 4; ++t) busy.at(t, 0) = 1;
    const double gap_busy = sweep_marginal_gap(Y, bpsk, g, sigma2, 8000, 500, busy, rng);
    checks::check_lt(gap_busy, 0.02, "sweep marginals match enumeration (active start, L=1)");
}

static void toy_marginals_with_memory() {
    Rng rng(43);
    const Constellation bpsk = Constellation::named("bpsk");
    const GlobalParams g = toy_globals(2, 1, {0.5}, {0.6}, {cxd(1.0, 0.0), cxd(0.6, -0.4)});

    LatentMatrices truth(3, 1);
    truth.at(0, 0) = 1;
    truth.at(1, 0) = 1;
    ObservationSet Y(3, 1);
    const double sigma2 = 0.5;
    for (int t = 0; t < 3; ++t) {
        cxd mean(0, 0);
        if (truth.at(t, 0)) mean += bpsk.value(truth.at(t, 0)) * g.tap(0, 0)[0];
        if (t > 0 && truth.at(t - 1, 0)) mean += bpsk.value(truth.at(t - 1, 0)) * g.tap(0, 1)[0];
        Y.row(t)[0] = mean + std::sqrt(0.5 * sigma2) * cxd(rng.normal(), rng.normal());
    }

    LatentMatrices idle(3, 1);
    const double gap = sweep_marginal_gap(Y, bpsk, g, sigma2, 8000, 500, idle, rng);
    checks::check_lt(gap, 0.02, "sweep marginals match enumeration (L=2 memory)");
}

static void ancestor_weight_formula() {
    // Brute force: the ancestor weight of particle i is its previous weight,
    // plus the transition density into the reference row, plus the likelihood
    // of the observations whose windows mix particle history with reference
    // rows. Compare after subtracting the max (weights are defined up to a
    // constant).
    Rng rng(44);
    const Constellation qpsk = Constellation::named("qpsk");

    for (int L : {2, 3}) {
        const int M = 2, D = 2, P = 6, T = 8;
        const int t = 4;  // step under test; t >= L so no zero-padding is needed
        std::vector<cxd> taps(static_cast<std::size_t>(M) * L * D);
        for (auto& v : taps) v = cxd(rng.normal(), rng.normal()) * 0.5;
        const GlobalParams g = toy_globals(L, D, {0.3, 0.5}, {0.8, 0.6}, taps);

        ObservationSet Y(T, D);
        for (auto& v : Y.data) v = cxd(rng.normal(), rng.normal());

        LatentMatrices ref(T, M);
        for (int tt = 0; tt < T; ++tt)
            for (int m = 0; m < M; ++m) ref.at(tt, m) = static_cast<SymCode>(rng.uniform_int(5));

        // Particle histories: rows t-L+1 .. t-1, oldest first.
        ParticleWindows hist(P, L - 1, M);
        for (int p = 0; p < P; ++p)
            for (int w = 0; w < L - 1; ++w)
                for (int m = 0; m < M; ++m)
                    hist.row(p, w)[m] = static_cast<SymCode>(rng.uniform_int(5));
        // prev_rows is row t-1 of every particle = the newest history row.
        std::vector<SymCode> prev(static_cast<std::size_t>(P) * M);
        for (int p = 0; p < P; ++p)
            for (int m = 0; m < M; ++m) prev[static_cast<std::size_t>(p) * M + m] =
                hist.row(p, L - 2)[m];

        std::vector<double> logw_prev(P);
        for (auto& w : logw_prev) w = rng.normal();

        std::vector<double> got(P);
        ancestor_logweights(Y, t, qpsk, g, 0.9, prev.data(), hist, logw_prev, ref, got);

        // Brute force with windows assembled by hand.
        std::vector<double> want(P);
        std::vector<cxd> scratch(D);
        for (int p = 0; p < P; ++p) {
            double w = logw_prev[p];
            for (int m = 0; m < M; ++m)
                w += log_transition_code(prev[static_cast<std::size_t>(p) * M + m], ref.at(t, m),
                                         g.a[m], g.b[m], qpsk);
            for (int tau = t; tau <= std::min(t + L - 2, T - 1); ++tau) {
                std::vector<SymCode> win(static_cast<std::size_t>(L) * M, 0);
                for (int r = tau - L + 1; r <= tau; ++r) {
                    SymCode* dst = win.data() + static_cast<std::size_t>(r - (tau - L + 1)) * M;
                    if (r < t) {
                        const int w_idx = r - (t - L + 1);
                        for (int m = 0; m < M; ++m) dst[m] = hist.row(p, w_idx)[m];
                    } else {
                        for (int m = 0; m < M; ++m) dst[m] = ref.at(r, m);
                    }
                }
                w += loglik_obs(Y.row(tau), qpsk, g, win, 0.9, scratch.data());
            }
            want[p] = w;
        }

        const double gm = *std::max_element(got.begin(), got.end());
        const double wm = *std::max_element(want.begin(), want.end());
        double worst = 0.0;
        for (int p = 0; p < P; ++p)
            worst = std::max(worst, std::abs((got[p] - gm) - (want[p] - wm)));
        char what[96];
        std::snprintf(what, sizeof what, "ancestor weights match brute force (L=%d)", L);
        checks::check_lt(worst, 1e-8, what);
    }
}

static void block_sweep_and_helpers() {
    Rng rng(45);
    const Constellation bpsk = Constellation::named("bpsk");
    const GlobalParams g =
        toy_globals(1, 1, {0.4, 0.3}, {0.7, 0.8}, {cxd(1.0, 0.0), cxd(0.0, 1.0)});

    // Fix chain 0's column, sweep only chain 1; compare against enumerating
    // chain 1's posterior on the chain-0-subtracted observations.
    LatentMatrices lat(4, 2);
    lat.at(0, 0) = 1;
    lat.at(1, 0) = 2;
    lat.at(3, 0) = 1;
    ObservationSet Y(4, 1);
    const double sigma2 = 0.8;
    for (int t = 0; t < 4; ++t) {
        cxd mean(0, 0);
        if (lat.at(t, 0)) mean += bpsk.value(lat.at(t, 0)) * g.tap(0, 0)[0];
        if (t == 1 || t == 2) mean += bpsk.value(1) * g.tap(1, 0)[0];
        Y.row(t)[0] = mean + std::sqrt(0.5 * sigma2) * cxd(rng.normal(), rng.normal());
    }
    const std::vector<SymCode> fixed_col = {lat.at(0, 0), lat.at(1, 0), lat.at(2, 0), lat.at(3, 0)};

    // subtract_chains: removing chain 0's mean must reproduce a hand
    // computation.
    const std::vector<int> chain0 = {0};
    const ObservationSet Ysub = subtract_chains(Y, lat, bpsk, g, chain0);
    bool sub_ok = true;
    for (int t = 0; t < 4; ++t) {
        const cxd mean0 = lat.at(t, 0) ? bpsk.value(lat.at(t, 0)) * g.tap(0, 0)[0] : cxd(0, 0);
        sub_ok &= std::abs(Ysub.row(t)[0] - (Y.row(t)[0] - mean0)) < 1e-14;
    }
    checks::check(sub_ok, "subtract_chains removes exactly the listed chains' mean");

    // Enumerate chain 1 alone on the subtracted data.
    GlobalParams g1;
    g1.L = 1;
    g1.D = 1;
    g1.sigma_l2 = {1.0};
    g1.append_chain(g.a[1], g.b[1], std::vector<cxd>{g.tap(1, 0)[0]});
    const oracle::Enumeration post = oracle::enumerate_posterior(Ysub, bpsk, g1, sigma2);

    PgasOptions opt;
    opt.particles = 30;
    const std::vector<int> block = {1};
    std::vector<std::vector<double>> freq(4, std::vector<double>(3, 0.0));
    const int sweeps = 8000, burn = 500;
    bool col0_fixed = true;
    int kept = 0;
    for (int r = 0; r < sweeps; ++r) {
        pgas_sweep_block(Y, lat, bpsk, g, sigma2, block, opt, rng);
        for (int t = 0; t < 4; ++t) col0_fixed &= (lat.at(t, 0) == fixed_col[t]);
        if (r < burn) continue;
        ++kept;
        for (int t = 0; t < 4; ++t) freq[t][lat.at(t, 1)] += 1.0;
    }
    checks::check(col0_fixed, "block sweep leaves chains outside the block untouched");
    double worst = 0.0;
    for (int t = 0; t < 4; ++t)
        for (int c = 0; c < 3; ++c)
            worst = std::max(worst, std::abs(freq[t][c] / kept - post.marginal(t, 0, c)));
    checks::check_lt(worst, 0.02, "block sweep matches the conditional posterior of the block");

    // compact: drop the all-idle columns, keep the rest aligned.
    LatentMatrices lc(3, 3);
    lc.at(0, 0) = 1;
    lc.at(2, 2) = 2;
    GlobalParams gc = toy_globals(1, 1, {0.5, 0.4, 0.3}, {0.9, 0.8, 0.7},
                                  {cxd(1, 0), cxd(2, 0), cxd(3, 0)});
    const int kept_chains = compact(lc, gc);
    checks::check(kept_chains == 2 && lc.M == 2 && gc.M() == 2, "compact drops the idle chain");
    checks::check(gc.a[0] == 0.5 && gc.a[1] == 0.3 && gc.tap(1, 0)[0] == cxd(3, 0),
                  "compact keeps the surviving chains in order");
    checks::check(lc.at(0, 0) == 1 && lc.at(2, 1) == 2, "compact remaps symbol columns");
}

int main() {
    pinning();
    toy_marginals_memoryless();
    toy_marginals_with_memory();
    ancestor_weight_formula();
    block_sweep_and_helpers();
    return checks::summary("pgas");
}
