#pragma once

#include <string>
#include <utility>
#include <vector>

#include "iffsm/model.hpp"
#include "iffsm/numerics.hpp"
#include "iffsm/rng.hpp"

namespace iffsm {

// Ground-truth channel of a simulated scenario: N transmitters, D receive
// antennas, L taps per link, stored flat as [m][l][d].
struct ChannelTaps {
    int N = 0, L = 1, D = 0;
    std::vector<cxd> h;

    ChannelTaps() = default;
    ChannelTaps(int N_, int L_, int D_)
        : N(N_), L(L_), D(D_), h(static_cast<std::size_t>(N_) * L_ * D_) {}
    cxd* tap(int m, int l) { return h.data() + (static_cast<std::size_t>(m) * L + l) * D; }
    const cxd* tap(int m, int l) const {
        return h.data() + (static_cast<std::size_t>(m) * L + l) * D;
    }
};

struct ScenarioConfig {
    int T = 1000;
    int D = 20;
    int L = 1;
    int N_t = 5;
    std::string constellation = "qpsk";
    double sigma_y2 = 2.0;
    int burst_len = 500;
    std::string channel_file; // empty = draw a Rayleigh channel
    void validate() const;
};

// Each tap h_m^l ~ CN(0, tap_var[l] I_D).
ChannelTaps gen_channel_rayleigh(int N, int D, int L, std::span<const double> tap_var, Rng& rng);

// One activity burst per transmitter: burst_len consecutive steps starting
// uniformly in the first half of the horizon (clipped so the burst fits).
// Returns (start, len) per transmitter, 0-based.
std::vector<std::pair<int, int>> gen_activity_bursts(int T, int N_t, int burst_len, Rng& rng);

// Uniform constellation symbols on the active slots, idle elsewhere.
LatentMatrices gen_symbols(const std::vector<std::pair<int, int>>& bursts, int T,
                           const Constellation& cst, Rng& rng);

// y_t = sum_m sum_l h_m^l x_{t-l,m} + noise, noise CN(0, sigma_y2 I_D).
// sigma_y2 == 0 produces noiseless observations.
ObservationSet gen_observations(const LatentMatrices& latents, const Constellation& cst,
                                const ChannelTaps& taps, double sigma_y2, Rng& rng);

// File format: a header line "N D L scale" followed by one line per
// coefficient, "m d l re im" with 1-based indices; '#' starts a comment.
// Imported coefficients are multiplied by the header scale.
ChannelTaps import_channel_file(const std::string& path);
// Writes taps so that import reproduces them: stored values are h / scale.
void export_channel_file(const std::string& path, const ChannelTaps& taps, double scale);

struct SimulatedScenario {
    ChannelTaps taps;
    LatentMatrices latents;
    ObservationSet obs;
    std::vector<std::pair<int, int>> bursts;
};

// Full generative pass. Tap variances follow hyper.mean_tap_var unless the
// config names a channel file (whose dimensions must then match).
SimulatedScenario simulate(const ScenarioConfig& cfg, const Hyperparams& hyper,
                           const Constellation& cst, Rng& rng);

} // namespace iffsm
