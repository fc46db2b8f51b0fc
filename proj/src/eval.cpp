#include "iffsm/eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "iffsm/gibbs.hpp"

namespace iffsm {

LatentMatrices vote_map_symbols(std::span<const LatentMatrices> window) {
    if (window.empty()) throw std::invalid_argument("vote_map_symbols: empty window");
    const int T = window[0].T, M = window[0].M;
    for (const auto& s : window)
        if (s.T != T || s.M != M)
            throw std::invalid_argument("vote_map_symbols: sample shapes differ");

    SymCode maxc = 0;
    for (const auto& s : window)
        for (SymCode c : s.x) maxc = std::max(maxc, c);

    LatentMatrices out(T, M);
    std::vector<int> counts(static_cast<std::size_t>(maxc) + 1);
    for (int t = 0; t < T; ++t) {
        for (int m = 0; m < M; ++m) {
            std::fill(counts.begin(), counts.end(), 0);
            for (const auto& s : window) ++counts[s.at(t, m)];
            int best = 0;
            for (int c = 1; c <= maxc; ++c)
                if (counts[c] > counts[best]) best = c;
            out.at(t, m) = static_cast<SymCode>(best);
        }
    }
    return out;
}

MapEstimate map_estimate(std::span<const LatentMatrices> window, const ObservationSet& Y,
                         const Constellation& cst, int L, std::span<const double> sigma_l2,
                         double sigma_y2) {
    MapEstimate est;
    est.latents = vote_map_symbols(window);
    est.L = L;
    est.D = Y.D;
    est.taps = channel_posterior_mean(Y, est.latents, cst, L, sigma_l2, sigma_y2);
    return est;
}

namespace {

double pair_mse(const MapEstimate& est, int i, const ChannelTaps& truth, int j, cxd rot) {
    const int Lmax = std::max(est.L, truth.L);
    const int D = truth.D;
    const cxd cr = std::conj(rot);
    double acc = 0.0;
    for (int l = 0; l < Lmax; ++l) {
        const cxd* ht = l < truth.L ? truth.tap(j, l) : nullptr;
        const cxd* he = l < est.L
                            ? est.taps.data() + (static_cast<std::size_t>(i) * est.L + l) * est.D
                            : nullptr;
        for (int d = 0; d < D; ++d) {
            cxd diff = (ht ? ht[d] : cxd(0.0, 0.0)) - cr * (he ? he[d] : cxd(0.0, 0.0));
            acc += std::norm(diff);
        }
    }
    return acc / (static_cast<double>(Lmax) * D);
}

} // namespace

Alignment align_chains(const MapEstimate& est, const ChannelTaps& truth, const Constellation& cst) {
    const int M = est.latents.M;
    const int N = truth.N;
    if (N > 20) throw std::runtime_error("align_chains: assignment search supports up to 20 true transmitters");
    if (est.D != truth.D) throw std::invalid_argument("align_chains: antenna counts differ");

    Alignment al;
    al.chain_to_user.assign(static_cast<std::size_t>(M), -1);
    al.rotation.assign(static_cast<std::size_t>(M), 0);
    const int K = std::min(M, N);
    if (K == 0) return al;

    const auto& rots = cst.symmetry_rotations();
    const int R = static_cast<int>(rots.size());
    std::vector<double> cost(static_cast<std::size_t>(M) * N);
    std::vector<int> bestrot(static_cast<std::size_t>(M) * N);
    for (int i = 0; i < M; ++i) {
        for (int j = 0; j < N; ++j) {
            double cbest = std::numeric_limits<double>::infinity();
            int rbest = 0;
            for (int r = 0; r < R; ++r) {
                double c = pair_mse(est, i, truth, j, rots[r]);
                if (c < cbest) { cbest = c; rbest = r; }
            }
            cost[static_cast<std::size_t>(i) * N + j] = cbest;
            bestrot[static_cast<std::size_t>(i) * N + j] = rbest;
        }
    }

    // Min-cost injective assignment with exactly K matched pairs, by subset
    // dynamic programming over the true-transmitter set (N <= 20).
    const std::size_t NM = std::size_t{1} << N;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> cur(NM, inf), nxt(NM);
    // choice[i][mask]: 0 = chain i unmatched, j+1 = chain i -> user j.
    std::vector<std::int8_t> choice(static_cast<std::size_t>(M) * NM);
    cur[0] = 0.0;
    for (int i = 0; i < M; ++i) {
        std::fill(nxt.begin(), nxt.end(), inf);
        std::int8_t* ch = choice.data() + static_cast<std::size_t>(i) * NM;
        for (std::size_t mask = 0; mask < NM; ++mask) {
            double base = cur[mask];
            if (base == inf) continue;
            if (base < nxt[mask]) { nxt[mask] = base; ch[mask] = 0; }
            for (int j = 0; j < N; ++j) {
                if (mask & (std::size_t{1} << j)) continue;
                std::size_t nm = mask | (std::size_t{1} << j);
                double c = base + cost[static_cast<std::size_t>(i) * N + j];
                if (c < nxt[nm]) { nxt[nm] = c; ch[nm] = static_cast<std::int8_t>(j + 1); }
            }
        }
        std::swap(cur, nxt);
    }

    std::size_t best_mask = 0;
    double best_val = inf;
    for (std::size_t mask = 0; mask < NM; ++mask) {
        if (std::popcount(mask) != K) continue;
        if (cur[mask] < best_val) { best_val = cur[mask]; best_mask = mask; }
    }
    if (best_val == inf) throw std::runtime_error("align_chains: no feasible assignment");

    std::size_t mask = best_mask;
    for (int i = M - 1; i >= 0; --i) {
        std::int8_t c = choice[static_cast<std::size_t>(i) * NM + mask];
        if (c != 0) {
            int j = c - 1;
            al.chain_to_user[i] = j;
            al.rotation[i] = bestrot[static_cast<std::size_t>(i) * N + j];
            mask &= ~(std::size_t{1} << j);
            ++al.matched;
        }
    }
    return al;
}

Metrics compute_metrics(const MapEstimate& est, const Alignment& al, const LatentMatrices& truth_x,
                        const ChannelTaps& truth_h, const Constellation& cst,
                        double recovered_threshold) {
    const int T = truth_x.T;
    if (est.latents.T != T) throw std::invalid_argument("compute_metrics: horizons differ");

    Metrics mt;
    mt.m_plus = est.latents.M;
    mt.matched = al.matched;
    if (al.matched == 0) {
        mt.ader = 1.0;
        mt.ser = 1.0;
        mt.mse_mean = std::numeric_limits<double>::quiet_NaN();
        return mt;
    }

    long act_err = 0, sym_err = 0;
    const auto& rots = cst.symmetry_rotations();
    for (int i = 0; i < est.latents.M; ++i) {
        int j = al.chain_to_user[i];
        if (j < 0) continue;
        const auto& rc = cst.rotation_code_map(al.rotation[i]);
        long active = 0, active_err = 0;
        for (int t = 0; t < T; ++t) {
            SymCode ce = rc[est.latents.at(t, i)];
            SymCode ct = truth_x.at(t, j);
            if ((ce != 0) != (ct != 0)) ++act_err;
            bool err = ce != ct;
            if (err) ++sym_err;
            if (ct != 0) {
                ++active;
                if (err) ++active_err;
            }
        }
        if (active > 0 && static_cast<double>(active_err) / active < recovered_threshold)
            ++mt.recovered;
        mt.mse.push_back(pair_mse(est, i, truth_h, j, rots[al.rotation[i]]));
    }
    const double denom = static_cast<double>(T) * al.matched;
    mt.ader = act_err / denom;
    mt.ser = sym_err / denom;
    double acc = 0.0;
    for (double v : mt.mse) acc += v;
    mt.mse_mean = acc / static_cast<double>(mt.mse.size());
    return mt;
}

BoxStats summarize_values(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("summarize_values: empty input");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    auto quantile = [&](double q) {
        double pos = q * static_cast<double>(v.size() - 1);
        std::size_t lo = static_cast<std::size_t>(pos);
        std::size_t hi = std::min(lo + 1, v.size() - 1);
        double frac = pos - static_cast<double>(lo);
        return v[lo] + (v[hi] - v[lo]) * frac;
    };
    BoxStats s;
    s.p25 = quantile(0.25);
    s.p50 = quantile(0.50);
    s.p75 = quantile(0.75);
    s.min = v.front();
    s.max = v.back();
    double acc = 0.0;
    for (double x : v) acc += x;
    s.mean = acc / static_cast<double>(v.size());
    return s;
}

} // namespace iffsm
