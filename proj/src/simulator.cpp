#include "iffsm/simulator.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace iffsm {

void ScenarioConfig::validate() const {
    if (T <= 0 || D <= 0 || L <= 0 || N_t < 0)
        throw std::invalid_argument("scenario: T, D, L must be positive and N_t nonnegative");
    if (!(sigma_y2 >= 0.0)) throw std::invalid_argument("scenario: sigma_y2 must be nonnegative");
    if (burst_len <= 0 || burst_len > T)
        throw std::invalid_argument("scenario: burst_len must lie in [1, T]");
}

ChannelTaps gen_channel_rayleigh(int N, int D, int L, std::span<const double> tap_var, Rng& rng) {
    if (tap_var.size() != static_cast<std::size_t>(L))
        throw std::invalid_argument("gen_channel_rayleigh: need one variance per lag");
    ChannelTaps taps(N, L, D);
    for (int m = 0; m < N; ++m)
        for (int l = 0; l < L; ++l)
            sample_cgauss(taps.tap(m, l), nullptr, tap_var[l], static_cast<std::size_t>(D), rng);
    return taps;
}

std::vector<std::pair<int, int>> gen_activity_bursts(int T, int N_t, int burst_len, Rng& rng) {
    if (burst_len <= 0 || burst_len > T)
        throw std::invalid_argument("gen_activity_bursts: burst_len must lie in [1, T]");
    // 1-based start drawn uniformly from [1, min(T/2, T - burst_len + 1)]
    const int start_max = std::max(1, std::min(T / 2, T - burst_len + 1));
    std::vector<std::pair<int, int>> bursts;
    bursts.reserve(static_cast<std::size_t>(N_t));
    for (int m = 0; m < N_t; ++m) {
        const int start = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(start_max)));
        bursts.emplace_back(start, burst_len);
    }
    return bursts;
}

LatentMatrices gen_symbols(const std::vector<std::pair<int, int>>& bursts, int T,
                           const Constellation& cst, Rng& rng) {
    LatentMatrices lat(T, static_cast<int>(bursts.size()));
    for (int m = 0; m < lat.M; ++m) {
        const auto [start, len] = bursts[static_cast<std::size_t>(m)];
        if (start < 0 || start + len > T)
            throw std::invalid_argument("gen_symbols: burst outside horizon");
        for (int t = start; t < start + len; ++t)
            lat.at(t, m) =
                static_cast<SymCode>(1 + rng.uniform_int(static_cast<std::uint64_t>(cst.size())));
    }
    return lat;
}

ObservationSet gen_observations(const LatentMatrices& latents, const Constellation& cst,
                                const ChannelTaps& taps, double sigma_y2, Rng& rng) {
    if (latents.M != taps.N)
        throw std::invalid_argument("gen_observations: chain count mismatch");
    ObservationSet obs(latents.T, taps.D);
    const auto& K = kernels::active();
    std::vector<cxd> mean(static_cast<std::size_t>(taps.D));
    for (int t = 0; t < latents.T; ++t) {
        std::fill(mean.begin(), mean.end(), cxd(0.0, 0.0));
        for (int l = 0; l < taps.L && l <= t; ++l) {
            const SymCode* row = latents.row(t - l);
            for (int m = 0; m < taps.N; ++m) {
                if (row[m] == 0) continue;
                K.caxpy(mean.data(), taps.tap(m, l), cst.value(row[m]),
                        static_cast<std::size_t>(taps.D));
            }
        }
        sample_cgauss(obs.row(t), mean.data(), sigma_y2, static_cast<std::size_t>(taps.D), rng);
    }
    return obs;
}

// ==== channel files =========================================================

ChannelTaps import_channel_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("channel file: cannot open " + path);
    std::string line;
    int lineno = 0;
    auto next_content_line = [&](std::string& out) {
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            out = line;
            return true;
        }
        return false;
    };
    std::string content;
    if (!next_content_line(content)) throw std::runtime_error("channel file: missing header");
    int N, D, L;
    double scale;
    {
        std::istringstream hs(content);
        if (!(hs >> N >> D >> L >> scale))
            throw std::runtime_error("channel file: line " + std::to_string(lineno) +
                                     ": expected header 'N D L scale'");
        std::string rest;
        if (hs >> rest)
            throw std::runtime_error("channel file: line " + std::to_string(lineno) +
                                     ": trailing tokens in header");
    }
    if (N <= 0 || D <= 0 || L <= 0 || !(scale > 0.0))
        throw std::runtime_error("channel file: header values must be positive");
    ChannelTaps taps(N, L, D);
    std::vector<char> seen(taps.h.size(), 0);
    while (next_content_line(content)) {
        std::istringstream ls(content);
        int m, d, l;
        double re, im;
        if (!(ls >> m >> d >> l >> re >> im))
            throw std::runtime_error("channel file: line " + std::to_string(lineno) +
                                     ": expected 'm d l re im'");
        std::string rest;
        if (ls >> rest)
            throw std::runtime_error("channel file: line " + std::to_string(lineno) +
                                     ": trailing tokens");
        if (m < 1 || m > N || d < 1 || d > D || l < 1 || l > L)
            throw std::runtime_error("channel file: line " + std::to_string(lineno) +
                                     ": index outside header dimensions");
        const std::size_t idx =
            (static_cast<std::size_t>(m - 1) * L + (l - 1)) * D + static_cast<std::size_t>(d - 1);
        if (seen[idx])
            throw std::runtime_error("channel file: line " + std::to_string(lineno) +
                                     ": duplicate coefficient");
        seen[idx] = 1;
        taps.h[idx] = cxd(re * scale, im * scale);
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) throw std::runtime_error("channel file: missing coefficients for declared shape");
    return taps;
}

void export_channel_file(const std::string& path, const ChannelTaps& taps, double scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("export_channel_file: scale must be positive");
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("channel file: cannot write " + path);
    std::fprintf(f, "%d %d %d %.17g\n", taps.N, taps.D, taps.L, scale);
    for (int m = 0; m < taps.N; ++m)
        for (int d = 0; d < taps.D; ++d)
            for (int l = 0; l < taps.L; ++l) {
                const cxd v = taps.tap(m, l)[d] / scale;
                std::fprintf(f, "%d %d %d %.17g %.17g\n", m + 1, d + 1, l + 1, v.real(), v.imag());
            }
    std::fclose(f);
}

SimulatedScenario simulate(const ScenarioConfig& cfg, const Hyperparams& hyper,
                           const Constellation& cst, Rng& rng) {
    cfg.validate();
    SimulatedScenario sim;
    if (!cfg.channel_file.empty()) {
        sim.taps = import_channel_file(cfg.channel_file);
        if (sim.taps.N != cfg.N_t || sim.taps.D != cfg.D || sim.taps.L != cfg.L)
            throw std::runtime_error("simulate: channel file dimensions do not match the scenario");
    } else {
        std::vector<double> tap_var(static_cast<std::size_t>(cfg.L));
        for (int l = 0; l < cfg.L; ++l) tap_var[static_cast<std::size_t>(l)] = hyper.mean_tap_var(l);
        sim.taps = gen_channel_rayleigh(cfg.N_t, cfg.D, cfg.L, tap_var, rng);
    }
    sim.bursts = gen_activity_bursts(cfg.T, cfg.N_t, cfg.burst_len, rng);
    sim.latents = gen_symbols(sim.bursts, cfg.T, cst, rng);
    sim.obs = gen_observations(sim.latents, cst, sim.taps, cfg.sigma_y2, rng);
    return sim;
}

} // namespace iffsm
