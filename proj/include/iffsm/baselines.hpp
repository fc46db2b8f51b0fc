#pragma once

#include <vector>

#include "iffsm/model.hpp"
#include "iffsm/pgas.hpp"
#include "iffsm/rng.hpp"
#include "iffsm/simulator.hpp"

namespace iffsm {

// Genie-aided detectors: the channel, the noise level, the transmitter count
// and the transition probabilities are known; only the symbols are inferred.
struct GenieConfig {
    ChannelTaps taps;
    double a = 0.998; // activation probability handed to the genie
    double b = 0.002; // persistence probability handed to the genie
    double sigma_y2 = 1.0;
    double state_cap = 1e6; // largest tolerated exact-recursion state budget
};

// Fixed global parameters for the genie detectors.
GlobalParams genie_globals(const GenieConfig& cfg);

// Particle-sweep detector with known parameters: runs `iters` conditional
// sweeps from an all-idle reference and returns the last n_keep trajectories.
std::vector<LatentMatrices> genie_pgas(const ObservationSet& Y, const Constellation& cst,
                                       const GenieConfig& cfg, const PgasOptions& opt,
                                       int iters, int n_keep, Rng& rng);

// Throws when (|A|+1)^(2L) exceeds cap.
void check_ffbs_cap(const Constellation& cst, int L, double cap);

// Exact forward-filter backward-sampler draw of chain m's column conditioned
// on the other columns, over the (|A|+1)^L extended window states.
void ffbs_chain(const ObservationSet& Y, const Constellation& cst, const GlobalParams& g,
                int m, LatentMatrices& latents, double sigma_y2, Rng& rng);

// Gibbs detector cycling exact per-chain draws; returns the last n_keep
// trajectories.
std::vector<LatentMatrices> genie_ffbs(const ObservationSet& Y, const Constellation& cst,
                                       const GenieConfig& cfg, int iters, int n_keep, Rng& rng);

// Exact joint smoother over all transmitters. marginal(t, m, c) is the
// posterior probability that transmitter m sent code c at step t; map is the
// per-symbol maximizer (ties toward the lower code).
struct BcjrResult {
    int T = 0, N = 0, Q1 = 0;
    std::vector<double> marginals; // [t][m][c]
    LatentMatrices map;

    double marginal(int t, int m, int c) const {
        return marginals[(static_cast<std::size_t>(t) * N + m) * Q1 + c];
    }
};

// Throws when (|A|+1)^(2LN) exceeds cfg.state_cap.
BcjrResult bcjr_joint(const ObservationSet& Y, const Constellation& cst, const GenieConfig& cfg);

} // namespace iffsm
