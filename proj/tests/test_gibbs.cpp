// Conjugate conditional updates (transition probabilities, channels, tap
// variances), the noise tempering schedule, the composite sweep, and state
// snapshots.

#include "check.hpp"
#include "iffsm/gibbs.hpp"
#include "iffsm/model.hpp"
#include "iffsm/rng.hpp"
#include "oracles.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

using namespace iffsm;

static void transition_counts() {
    LatentMatrices lat(4, 2);
    // column 0: all active
    for (int t = 0; t < 4; ++t) lat.at(t, 0) = 1;
    // column 1: active, active, idle, active
    lat.at(0, 1) = 2;
    lat.at(1, 1) = 1;
    lat.at(3, 1) = 2;

    const TransitionCounts c0 = count_transitions(lat, 0);
    checks::check(c0.n01 == 1 && c0.n11 == 3 && c0.n00 == 0 && c0.n10 == 0,
                  "counts for an always-active column (s_0 = 0)");
    const TransitionCounts c1 = count_transitions(lat, 1);
    checks::check(c1.n01 == 2 && c1.n11 == 1 && c1.n10 == 1 && c1.n00 == 0,
                  "counts for a column with a gap");
    checks::check(c0.n00 + c0.n01 + c0.n10 + c0.n11 == 4, "counts sum to T");
}

static void transition_probability_conditional() {
    // Column [1,1,0,1] with the default prior: a ~ Beta(2,1), b ~ Beta(beta0+1,
    // beta1+1). KS of repeated draws against the quadrature CDFs.
    LatentMatrices lat(4, 1);
    lat.at(0, 0) = 1;
    lat.at(1, 0) = 1;
    lat.at(3, 0) = 1;
    Hyperparams hyper;
    Rng rng(51);

    const int n = 100000;
    std::vector<double> da(n), db(n);
    GlobalParams g;
    g.L = 1;
    g.D = 1;
    g.sigma_l2 = {1.0};
    g.append_chain(0.5, 0.5, std::vector<cxd>{cxd(1, 0)});
    for (int i = 0; i < n; ++i) {
        sample_transition_probs(lat, g, hyper, rng);
        da[i] = g.a[0];
        db[i] = g.b[0];
    }
    oracle::QuadCdf beta21([](double x) { return std::log(x); }, 1e-12, 1.0 - 1e-12, 20001);
    checks::check_lt(oracle::ks_statistic(da, beta21), 0.01,
                     "KS: activation conditional is Beta(2,1)");
    const double b0 = hyper.beta0 + 1.0, b1 = hyper.beta1 + 1.0;
    oracle::QuadCdf betab(
        [&](double x) { return (b0 - 1.0) * std::log(x) + (b1 - 1.0) * std::log1p(-x); }, 1e-12,
        1.0 - 1e-12, 20001);
    checks::check_lt(oracle::ks_statistic(db, betab), 0.01,
                     "KS: persistence conditional is Beta(beta0+n11, beta1+n10)");
}

static void channel_conditional() {
    const Constellation bpsk = Constellation::named("bpsk");
    Hyperparams hyper;
    Rng rng(52);

    // All-idle symbols: the conditional is the prior CN(0, sigma_l2).
    {
        LatentMatrices lat(6, 1);
        ObservationSet Y(6, 2);
        for (auto& v : Y.data) v = cxd(rng.normal(), rng.normal());
        GlobalParams g;
        g.L = 1;
        g.D = 2;
        g.sigma_l2 = {0.7};
        g.append_chain(0.5, 0.5, std::vector<cxd>{cxd(0, 0), cxd(0, 0)});
        const int n = 20000;
        double acc2 = 0.0;
        cxd acc(0, 0);
        for (int i = 0; i < n; ++i) {
            sample_channels(Y, lat, bpsk, g, hyper, 1.0, rng);
            acc += g.tap(0, 0)[0];
            acc2 += std::norm(g.tap(0, 0)[0]);
        }
        checks::check_near(std::abs(acc) / n, 0.0, 0.02, "idle chain: tap posterior mean is 0");
        checks::check_near(acc2 / n, 0.7, 0.03, "idle chain: tap posterior variance is the prior");
    }

    // Strong data, diffuse prior: the posterior mean approaches least squares
    // (here: the true channel, since the data are noiseless).
    {
        Rng drng(53);
        LatentMatrices lat(40, 1);
        for (int t = 0; t < 40; ++t) lat.at(t, 0) = static_cast<SymCode>(1 + drng.uniform_int(2));
        const cxd h_true(0.8, -1.1);
        ObservationSet Y(40, 1);
        for (int t = 0; t < 40; ++t) Y.row(t)[0] = h_true * bpsk.value(lat.at(t, 0));
        const std::vector<double> huge = {1e8};
        const std::vector<cxd> mu = channel_posterior_mean(Y, lat, bpsk, 1, huge, 1e-6);
        checks::check_near(std::abs(mu[0] - h_true), 0.0, 1e-6,
                           "diffuse prior: posterior mean equals the least-squares channel");
    }

    // L=2 identifiability: two taps recovered from noiseless data.
    {
        Rng drng(54);
        LatentMatrices lat(60, 1);
        for (int t = 0; t < 60; ++t)
            lat.at(t, 0) = (drng.u01() < 0.3) ? 0 : static_cast<SymCode>(1 + drng.uniform_int(2));
        const cxd h0(1.0, 0.2), h1(-0.4, 0.6);
        ObservationSet Y(60, 1);
        for (int t = 0; t < 60; ++t) {
            cxd mean(0, 0);
            if (lat.at(t, 0)) mean += h0 * bpsk.value(lat.at(t, 0));
            if (t > 0 && lat.at(t - 1, 0)) mean += h1 * bpsk.value(lat.at(t - 1, 0));
            Y.row(t)[0] = mean;
        }
        const std::vector<double> huge = {1e8, 1e8};
        const std::vector<cxd> mu = channel_posterior_mean(Y, lat, bpsk, 2, huge, 1e-6);
        checks::check(std::abs(mu[0] - h0) < 1e-5 && std::abs(mu[1] - h1) < 1e-5,
                      "two-tap channel recovered from noiseless data");
    }
}

static void tap_variance_conditional() {
    // sigma_l^2 | taps ~ InvGamma(tau + D*M, nu_l + sum ||h||^2).
    Hyperparams hyper;
    Rng rng(55);
    GlobalParams g;
    g.L = 1;
    g.D = 2;
    g.sigma_l2 = {1.0};
    g.append_chain(0.5, 0.5, std::vector<cxd>{cxd(1, 0), cxd(0, -1)});
    g.append_chain(0.5, 0.5, std::vector<cxd>{cxd(0.5, 0.5), cxd(1, 1)});
    const double h2 = 1.0 + 1.0 + 0.5 + 2.0;
    const double shape = hyper.tau() + 4.0;  // D*M = 4
    const double scale = hyper.nu(0) + h2;

    const int n = 100000;
    std::vector<double> draws(n);
    for (int i = 0; i < n; ++i) {
        g.sigma_l2[0] = 1.0;
        sample_tap_variances(g, hyper, rng);
        draws[i] = g.sigma_l2[0];
    }
    oracle::QuadCdf ig(
        [&](double x) { return -(shape + 1.0) * std::log(x) - scale / x; }, 1e-4, 40.0, 40001);
    checks::check_lt(oracle::ks_statistic(draws, ig), 0.01,
                     "KS: tap variance conditional is the stated inverse gamma");
}

static void temper_schedule() {
    TemperSchedule ts;
    ts.mode = TemperSchedule::Mode::geometric;
    ts.sigma_y2 = 2.0;
    ts.sigma_start2 = std::pow(10.0, 1.2);
    ts.decay = 0.9995;
    ts.temper_iters = 100;
    ts.validate();
    checks::check_near(ts.effective(0), ts.sigma_start2, 1e-12, "geometric: starts at sigma_start2");
    checks::check_near(ts.effective(10), 2.0 + (ts.sigma_start2 - 2.0) * std::pow(0.9995, 10),
                       1e-12, "geometric: decays toward sigma_y2");
    checks::check_near(ts.effective(100), 2.0, 0.0, "geometric: exactly sigma_y2 at temper_iters");
    checks::check_near(ts.effective(5000), 2.0, 0.0, "geometric: stays at sigma_y2 afterwards");
    bool monotone = true;
    for (int i = 1; i <= 200; ++i) monotone &= (ts.effective(i) <= ts.effective(i - 1) + 1e-15);
    checks::check(monotone, "geometric: monotone nonincreasing");

    TemperSchedule lin;
    lin.mode = TemperSchedule::Mode::linear_db;
    lin.sigma_y2 = 1e-2;
    lin.sigma_start2 = 1e2;
    lin.temper_iters = 100;
    lin.validate();
    checks::check_near(lin.effective(0), 1e2, 1e-10, "linear-dB: starts at sigma_start2");
    checks::check_near(lin.effective(50), 1.0, 1e-10,
                       "linear-dB: geometric mean at the halfway point");
    checks::check_near(lin.effective(100), 1e-2, 0.0, "linear-dB: lands exactly on sigma_y2");

    TemperSchedule off;
    off.sigma_y2 = 3.0;
    checks::check_near(off.effective(0), 3.0, 0.0, "off: always sigma_y2");

    TemperSchedule bad = ts;
    bad.decay = 0.0;
    bool threw = false;
    try {
        bad.validate();
    } catch (const std::invalid_argument&) {
        threw = true;
    }
    checks::check(threw, "validation rejects a zero decay");
}

static void composite_sweep() {
    // Two short runs on the same simulated data. A cold start checks the
    // structural invariants (finite likelihood, chain cap, iteration and
    // noise bookkeeping) across the slice-birth / sweep / compact /
    // conjugate-update cycle, including the empty-model paths. A warm start
    // at the true configuration then checks that the composite kernel
    // retains and tracks an actual user: discovery from scratch at this toy
    // scale (40 particles, 120 iterations) is a low-probability event by
    // design, so retention is the meaningful deterministic assertion here.
    Rng rng(56);
    const Constellation qpsk = Constellation::named("qpsk");
    Hyperparams hyper;
    GlobalParams g_true;
    g_true.L = 1;
    g_true.D = 3;
    g_true.sigma_l2 = {1.0};
    g_true.append_chain(0.1, 0.95, std::vector<cxd>{cxd(1, 0.2), cxd(-0.5, 1), cxd(0.3, -0.8)});

    LatentMatrices truth(60, 1);
    for (int t = 10; t < 40; ++t) truth.at(t, 0) = static_cast<SymCode>(1 + rng.uniform_int(4));
    ObservationSet Y(60, 3);
    const double sigma2 = 0.3;
    for (int t = 0; t < 60; ++t) {
        for (int d = 0; d < 3; ++d) {
            cxd mean = truth.at(t, 0) ? qpsk.value(truth.at(t, 0)) * g_true.tap(0, 0)[d] : cxd(0, 0);
            Y.row(t)[d] = mean + std::sqrt(0.5 * sigma2) * cxd(rng.normal(), rng.normal());
        }
    }

    TemperSchedule ts;
    ts.mode = TemperSchedule::Mode::geometric;
    ts.sigma_y2 = sigma2;
    ts.sigma_start2 = 3.0;
    ts.decay = 0.95;
    ts.temper_iters = 60;

    SamplerOptions opt;
    opt.max_chains = 8;
    opt.pgas.particles = 40;

    SamplerState st = init_state(60, 1, 3, hyper, rng);
    bool finite = true, capped = true;
    for (int it = 0; it < 120; ++it) {
        full_iteration(st, Y, qpsk, hyper, ts, opt, rng);
        finite &= std::isfinite(st.loglik);
        capped &= (st.globals.M() <= 8) && (st.latents.M == st.globals.M());
    }
    checks::check(finite, "composite sweep keeps a finite log likelihood");
    checks::check(capped, "composite sweep respects the chain cap");
    checks::check(st.iter == 120, "iteration counter advances");
    checks::check_near(st.sigma_eff2, sigma2, 1e-12, "noise level lands on sigma_y2");

    // Warm start: seed the sampler at the truth and run without tempering.
    // The chain must survive every iteration and keep decoding the burst.
    SamplerState warm;
    warm.latents = truth;
    warm.globals = g_true;
    TemperSchedule flat;
    flat.mode = TemperSchedule::Mode::off;
    flat.sigma_y2 = sigma2;
    int min_m = warm.globals.M();
    for (int it = 0; it < 50; ++it) {
        full_iteration(warm, Y, qpsk, hyper, flat, opt, rng);
        min_m = std::min(min_m, warm.globals.M());
    }
    checks::check(min_m >= 1, "warm-started chain survives every iteration");
    int window_hits = 0;
    if (warm.globals.M() >= 1) {
        for (int t = 10; t < 40; ++t) window_hits += (warm.latents.at(t, 0) == truth.at(t, 0));
    }
    checks::check(window_hits >= 27, "warm-started chain keeps decoding the burst");
    checks::check(warm.globals.M() >= 1 && warm.globals.b[0] > 0.5,
                  "persistence posterior reflects the long burst");

    // Snapshot round trip preserves the warm state bit-exactly.
    std::stringstream ss;
    write_snapshot(ss, warm);
    const SamplerState back = read_snapshot(ss);
    const SamplerState& st2 = warm;
    bool same = back.iter == st2.iter && back.sigma_eff2 == st2.sigma_eff2 &&
                back.loglik == st2.loglik && back.latents.x == st2.latents.x &&
                back.globals.a == st2.globals.a && back.globals.b == st2.globals.b &&
                back.globals.taps == st2.globals.taps && back.globals.sigma_l2 == st2.globals.sigma_l2 &&
                back.globals.L == st2.globals.L && back.globals.D == st2.globals.D;
    checks::check(same, "snapshot write/read round trip is bit-exact");
    std::stringstream ss2;
    write_snapshot(ss2, back);
    checks::check(ss2.str() == ss.str(), "re-written snapshot is byte-identical");
}

int main() {
    transition_counts();
    transition_probability_conditional();
    channel_conditional();
    tap_variance_conditional();
    temper_schedule();
    composite_sweep();
    return checks::summary("gibbs");
}
