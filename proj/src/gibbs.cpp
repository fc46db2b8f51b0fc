#include "iffsm/gibbs.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "iffsm/mibp.hpp"
#include "iffsm/numerics.hpp"

namespace iffsm {

TransitionCounts count_transitions(const LatentMatrices& latents, int m) {
    TransitionCounts c;
    int prev = 0;
    for (int t = 0; t < latents.T; ++t) {
        const int cur = latents.active(t, m) ? 1 : 0;
        if (prev == 0)
            ++(cur ? c.n01 : c.n00);
        else
            ++(cur ? c.n11 : c.n10);
        prev = cur;
    }
    return c;
}

void sample_transition_probs(const LatentMatrices& latents, GlobalParams& g,
                             const Hyperparams& hyper, Rng& rng) {
    if (latents.M != g.M()) throw std::invalid_argument("sample_transition_probs: shape mismatch");
    for (int m = 0; m < g.M(); ++m) {
        const TransitionCounts c = count_transitions(latents, m);
        const double sa0 = hyper.a_prior0 + c.n01;
        const double sa1 = hyper.a_prior1 + c.n00;
        if (!(sa0 > 0.0) || !(sa1 > 0.0))
            throw std::logic_error(
                "sample_transition_probs: improper activation posterior for an all-idle chain; "
                "compact first or use proper prior pseudo-counts");
        g.a[m] = rng.beta(sa0, sa1);
        g.b[m] = rng.beta(hyper.beta0 + c.n11, hyper.beta1 + c.n10);
    }
}

// ==== channel conditional ===================================================

namespace {

// Extended regressor matrix: column m*L + l holds x_{t-l, m} values.
Eigen::MatrixXcd extended_symbols(const LatentMatrices& latents, const Constellation& cst, int L) {
    const int T = latents.T, M = latents.M;
    Eigen::MatrixXcd X = Eigen::MatrixXcd::Zero(T, static_cast<Eigen::Index>(L) * M);
    for (int t = 0; t < T; ++t)
        for (int l = 0; l < L && l <= t; ++l) {
            const SymCode* row = latents.row(t - l);
            for (int m = 0; m < M; ++m)
                if (row[m]) X(t, static_cast<Eigen::Index>(m) * L + l) = cst.value(row[m]);
        }
    return X;
}

// Posterior precision A = diag(1/sigma_l2) + X^H X / sigma_eff2 shared by all
// antennas; returns its LLT factorization.
Eigen::LLT<Eigen::MatrixXcd> posterior_precision_llt(const Eigen::MatrixXcd& X, int M, int L,
                                                     std::span<const double> sigma_l2,
                                                     double sigma_eff2) {
    const Eigen::Index K = X.cols();
    Eigen::MatrixXcd A = (X.adjoint() * X) / sigma_eff2;
    for (Eigen::Index j = 0; j < K; ++j) {
        const int l = static_cast<int>(j) % L;
        A(j, j) += 1.0 / sigma_l2[static_cast<std::size_t>(l)];
    }
    Eigen::LLT<Eigen::MatrixXcd> llt(A);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("channel conditional: posterior precision not positive definite");
    (void)M;
    return llt;
}

} // namespace

std::vector<cxd> channel_posterior_mean(const ObservationSet& Y, const LatentMatrices& latents,
                                        const Constellation& cst, int L,
                                        std::span<const double> sigma_l2, double sigma_eff2) {
    const int M = latents.M, D = Y.D, T = Y.T;
    std::vector<cxd> out(static_cast<std::size_t>(M) * L * D, cxd(0.0, 0.0));
    if (M == 0) return out;
    const Eigen::MatrixXcd X = extended_symbols(latents, cst, L);
    const auto llt = posterior_precision_llt(X, M, L, sigma_l2, sigma_eff2);
    Eigen::MatrixXcd Ymat(T, D);
    for (int t = 0; t < T; ++t)
        for (int d = 0; d < D; ++d) Ymat(t, d) = Y.row(t)[d];
    const Eigen::MatrixXcd rhs = X.adjoint() * Ymat / sigma_eff2; // K x D
    const Eigen::MatrixXcd mu = llt.solve(rhs);
    for (int m = 0; m < M; ++m)
        for (int l = 0; l < L; ++l)
            for (int d = 0; d < D; ++d)
                out[(static_cast<std::size_t>(m) * L + l) * D + d] =
                    mu(static_cast<Eigen::Index>(m) * L + l, d);
    return out;
}

void sample_channels(const ObservationSet& Y, const LatentMatrices& latents,
                     const Constellation& cst, GlobalParams& g, const Hyperparams& hyper,
                     double sigma_eff2, Rng& rng) {
    (void)hyper;
    const int M = g.M(), L = g.L, D = g.D, T = Y.T;
    if (latents.M != M) throw std::invalid_argument("sample_channels: shape mismatch");
    if (M == 0) return;
    const Eigen::MatrixXcd X = extended_symbols(latents, cst, L);
    const auto llt = posterior_precision_llt(X, M, L, g.sigma_l2, sigma_eff2);
    const Eigen::Index K = X.cols();

    Eigen::MatrixXcd Ymat(T, D);
    for (int t = 0; t < T; ++t)
        for (int d = 0; d < D; ++d) Ymat(t, d) = Y.row(t)[d];
    const Eigen::MatrixXcd mu = llt.solve(X.adjoint() * Ymat / sigma_eff2); // K x D

    // A = R R^H with R lower triangular; mu + R^{-H} z has covariance A^{-1}
    const Eigen::MatrixXcd R = llt.matrixL();
    Eigen::VectorXcd z(K);
    for (int d = 0; d < D; ++d) {
        for (Eigen::Index j = 0; j < K; ++j) {
            const double re = rng.normal(), im = rng.normal();
            z(j) = cxd(re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0);
        }
        const Eigen::VectorXcd h =
            mu.col(d) + R.adjoint().triangularView<Eigen::Upper>().solve(z);
        for (int m = 0; m < M; ++m)
            for (int l = 0; l < L; ++l)
                g.tap(m, l)[d] = h(static_cast<Eigen::Index>(m) * L + l);
    }
}

void sample_tap_variances(GlobalParams& g, const Hyperparams& hyper, Rng& rng) {
    const double tau = hyper.tau();
    for (int l = 0; l < g.L; ++l) {
        double ss = 0.0;
        for (int m = 0; m < g.M(); ++m) {
            const cxd* h = g.tap(m, l);
            for (int d = 0; d < g.D; ++d) ss += std::norm(h[d]);
        }
        const double shape = tau + static_cast<double>(g.D) * g.M();
        const double scale = hyper.nu(l) + ss;
        g.sigma_l2[static_cast<std::size_t>(l)] = rng.invgamma(shape, scale);
    }
}

// ==== tempering =============================================================

void TemperSchedule::validate() const {
    if (!(sigma_y2 > 0.0)) throw std::invalid_argument("temper: sigma_y2 must be positive");
    if (mode == Mode::off) return;
    if (!(sigma_start2 >= sigma_y2))
        throw std::invalid_argument("temper: sigma_start2 must be >= sigma_y2");
    if (temper_iters < 0) throw std::invalid_argument("temper: temper_iters must be nonnegative");
    if (mode == Mode::geometric && !(decay > 0.0 && decay <= 1.0))
        throw std::invalid_argument("temper: decay must lie in (0, 1]");
}

double TemperSchedule::effective(int iter) const {
    if (mode == Mode::off || iter >= temper_iters) return sigma_y2;
    if (mode == Mode::geometric)
        return sigma_y2 + (sigma_start2 - sigma_y2) * std::pow(decay, iter);
    // linear in dB from sigma_start2 down to sigma_y2 across temper_iters
    const double f = static_cast<double>(iter) / static_cast<double>(temper_iters);
    const double lg =
        (1.0 - f) * std::log10(sigma_start2) + f * std::log10(sigma_y2);
    return std::pow(10.0, lg);
}

// ==== full iteration ========================================================

SamplerState init_state(int T, int L, int D, const Hyperparams& hyper, Rng& rng) {
    hyper.validate();
    SamplerState st;
    st.latents = LatentMatrices(T, 0);
    st.globals.L = L;
    st.globals.D = D;
    st.globals.sigma_l2.resize(static_cast<std::size_t>(L));
    for (int l = 0; l < L; ++l)
        st.globals.sigma_l2[static_cast<std::size_t>(l)] =
            rng.invgamma(hyper.tau(), hyper.nu(l));
    // seed one idle chain from the prior so the first sweep has something to
    // work with
    std::vector<cxd> taps(static_cast<std::size_t>(L) * D);
    for (int l = 0; l < L; ++l)
        sample_cgauss(taps.data() + static_cast<std::size_t>(l) * D, nullptr,
                      st.globals.sigma_l2[static_cast<std::size_t>(l)],
                      static_cast<std::size_t>(D), rng);
    st.globals.append_chain(rng.beta(hyper.alpha, 1.0), rng.beta(hyper.beta0, hyper.beta1), taps);
    st.latents.append_zero_column();
    return st;
}

double observation_loglik(const ObservationSet& Y, const LatentMatrices& latents,
                          const Constellation& cst, const GlobalParams& g, double sigma2) {
    const int L = g.L, M = g.M();
    std::vector<cxd> scratch(static_cast<std::size_t>(Y.D));
    std::vector<SymCode> win(static_cast<std::size_t>(L) * M, 0);
    double total = 0.0;
    for (int t = 0; t < Y.T; ++t) {
        for (int l = 0; l < L; ++l) {
            SymCode* row = win.data() + static_cast<std::size_t>(L - 1 - l) * M;
            if (l <= t)
                std::copy_n(latents.row(t - l), M, row);
            else
                std::fill_n(row, M, SymCode{0});
        }
        total += loglik_obs(Y.row(t), cst, g, win, sigma2, scratch.data());
    }
    return total;
}

void full_iteration(SamplerState& state, const ObservationSet& Y, const Constellation& cst,
                    const Hyperparams& hyper, const TemperSchedule& schedule,
                    const SamplerOptions& opt, Rng& rng) {
    schedule.validate();
    state.sigma_eff2 = schedule.effective(state.iter);

    double theta = 0.0; // 0 = no birth step, so every chain is swept
    if (opt.birth) {
        // The state-independent slice pairs with a descent bound of 1: the
        // whole idle pool above theta is regenerated, not only the part
        // below the smallest active stick.
        const bool fixed_bound = opt.slice == SliceMode::power;
        const double a_min = fixed_bound ? 1.0 : active_a_min(state.globals);
        theta = draw_slice(a_min, opt.slice, state.latents.T, rng);
        const BirthResult birth = extend_chains(state.latents, state.globals, hyper, theta, rng,
                                                opt.max_chains, fixed_bound ? 1.0 : 0.0);
        state.ars_fallbacks += birth.ars_fallbacks;
    }

    // Only chains whose sticks exceed the slice are swept. Deciding the swept
    // set by the sticks alone (never by the columns being resampled) is what
    // lets chains fall back into the unrepresented pool and be regenerated
    // from it without tilting the chain-count distribution; chains with
    // sticks below theta keep their columns until a later iteration.
    const int M = state.globals.M();
    std::vector<int> sweep;
    sweep.reserve(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m)
        if (state.globals.a[static_cast<std::size_t>(m)] > theta) sweep.push_back(m);
    const int S = static_cast<int>(sweep.size());
    if (S > 0) {
        if (S == M && (opt.block_size <= 0 || opt.block_size >= M)) {
            state.latents = pgas_sweep(Y, state.latents, cst, state.globals, state.sigma_eff2,
                                       opt.pgas, rng);
        } else {
            for (int m = S - 1; m > 0; --m)
                std::swap(sweep[static_cast<std::size_t>(m)],
                          sweep[rng.uniform_int(static_cast<std::uint64_t>(m) + 1)]);
            const int len_cap = (opt.block_size > 0 && opt.block_size < S) ? opt.block_size : S;
            for (int start = 0; start < S; start += len_cap) {
                const int len = std::min(len_cap, S - start);
                pgas_sweep_block(Y, state.latents, cst, state.globals, state.sigma_eff2,
                                 std::span<const int>(sweep.data() + start,
                                                      static_cast<std::size_t>(len)),
                                 opt.pgas, rng);
            }
        }
    }

    if (opt.compact_chains) compact(state.latents, state.globals);

    if (opt.update_globals) {
        if (state.globals.M() > 0) {
            sample_transition_probs(state.latents, state.globals, hyper, rng);
            sample_channels(Y, state.latents, cst, state.globals, hyper, state.sigma_eff2, rng);
        }
        sample_tap_variances(state.globals, hyper, rng);
    }

    state.loglik = observation_loglik(Y, state.latents, cst, state.globals, state.sigma_eff2);
    ++state.iter;
}

// ==== snapshots =============================================================

void write_snapshot(std::ostream& os, const SamplerState& state) {
    const GlobalParams& g = state.globals;
    os << "iffsm-snapshot 1\n";
    os << "iter " << state.iter << "\n";
    char buf[64];
    auto put = [&](const char* k, double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << k << " " << buf << "\n";
    };
    put("sigma_eff2", state.sigma_eff2);
    put("loglik", state.loglik);
    os << "T " << state.latents.T << "\nM " << g.M() << "\nL " << g.L << "\nD " << g.D << "\n";
    os << "sigma_l2";
    for (double v : g.sigma_l2) {
        std::snprintf(buf, sizeof buf, " %.17g", v);
        os << buf;
    }
    os << "\n";
    for (int m = 0; m < g.M(); ++m) {
        os << "chain " << m << "\n";
        put("a", g.a[m]);
        put("b", g.b[m]);
        for (int l = 0; l < g.L; ++l) {
            os << "h " << l << " :";
            const cxd* h = g.tap(m, l);
            for (int d = 0; d < g.D; ++d) {
                std::snprintf(buf, sizeof buf, " %.17g %.17g", h[d].real(), h[d].imag());
                os << buf;
            }
            os << "\n";
        }
    }
    for (int t = 0; t < state.latents.T; ++t) {
        os << "x " << t << " :";
        for (int m = 0; m < state.latents.M; ++m) os << " " << state.latents.at(t, m);
        os << "\n";
    }
    os << "end\n";
}

namespace {

std::istringstream expect_line(std::istream& is, const char* head) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("snapshot: unexpected end of input");
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok != head)
        throw std::runtime_error(std::string("snapshot: expected '") + head + "', got '" + tok +
                                 "'");
    return ls;
}

} // namespace

SamplerState read_snapshot(std::istream& is) {
    SamplerState st;
    {
        auto ls = expect_line(is, "iffsm-snapshot");
        int ver = 0;
        ls >> ver;
        if (ver != 1) throw std::runtime_error("snapshot: unsupported version");
    }
    int T = 0, M = 0, L = 0, D = 0;
    expect_line(is, "iter") >> st.iter;
    expect_line(is, "sigma_eff2") >> st.sigma_eff2;
    expect_line(is, "loglik") >> st.loglik;
    expect_line(is, "T") >> T;
    expect_line(is, "M") >> M;
    expect_line(is, "L") >> L;
    expect_line(is, "D") >> D;
    st.latents = LatentMatrices(T, M);
    st.globals.L = L;
    st.globals.D = D;
    st.globals.sigma_l2.resize(static_cast<std::size_t>(L));
    {
        auto ls = expect_line(is, "sigma_l2");
        for (double& v : st.globals.sigma_l2)
            if (!(ls >> v)) throw std::runtime_error("snapshot: truncated sigma_l2 line");
    }
    std::vector<cxd> taps(static_cast<std::size_t>(L) * D);
    for (int m = 0; m < M; ++m) {
        int mm = -1;
        expect_line(is, "chain") >> mm;
        if (mm != m) throw std::runtime_error("snapshot: chain index out of order");
        double a, b;
        expect_line(is, "a") >> a;
        expect_line(is, "b") >> b;
        for (int l = 0; l < L; ++l) {
            auto ls = expect_line(is, "h");
            int ll = -1;
            std::string colon;
            ls >> ll >> colon;
            if (ll != l || colon != ":") throw std::runtime_error("snapshot: malformed tap line");
            for (int d = 0; d < D; ++d) {
                double re, im;
                if (!(ls >> re >> im)) throw std::runtime_error("snapshot: truncated tap line");
                taps[static_cast<std::size_t>(l) * D + d] = cxd(re, im);
            }
        }
        st.globals.append_chain(a, b, taps);
    }
    for (int t = 0; t < T; ++t) {
        auto ls = expect_line(is, "x");
        int tt = -1;
        std::string colon;
        ls >> tt >> colon;
        if (tt != t || colon != ":") throw std::runtime_error("snapshot: malformed symbol line");
        for (int m = 0; m < M; ++m) {
            int c;
            if (!(ls >> c)) throw std::runtime_error("snapshot: truncated symbol line");
            st.latents.at(t, m) = static_cast<SymCode>(c);
        }
    }
    expect_line(is, "end");
    return st;
}

} // namespace iffsm
