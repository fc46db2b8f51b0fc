#pragma once

#include <span>

#include "iffsm/model.hpp"
#include "iffsm/rng.hpp"

namespace iffsm {

struct PgasOptions {
    int particles = 3000;
    bool systematic = false; // resampling flavor for the free particles
};

// The L-1 most recent symbol rows per particle, oldest first; empty when
// L == 1.
struct ParticleWindows {
    int P = 0, W = 0, M = 0;
    std::vector<SymCode> codes; // [p][w][m]

    ParticleWindows() = default;
    ParticleWindows(int P_, int W_, int M_)
        : P(P_), W(W_), M(M_),
          codes(static_cast<std::size_t>(P_) * W_ * M_, 0) {}
    SymCode* row(int p, int w) {
        return codes.data() + (static_cast<std::size_t>(p) * W + w) * M;
    }
    const SymCode* row(int p, int w) const {
        return codes.data() + (static_cast<std::size_t>(p) * W + w) * M;
    }
};

// Importance log weight of one particle and step: under the bootstrap
// proposal the prior cancels, leaving the observation log likelihood of the
// assembled window.
double importance_logweight(const cxd* y, const Constellation& cst, const GlobalParams& g,
                            std::span<const SymCode> win, double sigma_eff2, cxd* scratch);

// Ancestor log weights at step t (0-based, t >= 1): previous log weight plus
// the transition density into the reference row plus the spliced-window
// likelihood corrections for y_t .. y_{t+L-2} (truncated at the horizon).
// prev_rows holds row t-1 of every particle (P x M); hist holds rows
// t-L+1 .. t-1 and is only read when L > 1.
void ancestor_logweights(const ObservationSet& Y, int t, const Constellation& cst,
                         const GlobalParams& g, double sigma_eff2,
                         const SymCode* prev_rows, const ParticleWindows& hist,
                         std::span<const double> logw_prev, const LatentMatrices& ref,
                         std::span<double> out);

// One conditional SMC sweep with ancestor sampling; the reference trajectory
// is pinned to the last particle and a full trajectory is drawn from the
// final weights. Throws std::runtime_error when every particle weight
// degenerates at some step.
LatentMatrices pgas_sweep(const ObservationSet& Y, const LatentMatrices& ref,
                          const Constellation& cst, const GlobalParams& g, double sigma_eff2,
                          const PgasOptions& opt, Rng& rng);

// Sweep over the chains in `block` only: the remaining chains' contributions
// are subtracted from the observations and their columns stay fixed.
void pgas_sweep_block(const ObservationSet& Y, LatentMatrices& latents, const Constellation& cst,
                      const GlobalParams& g, double sigma_eff2, std::span<const int> block,
                      const PgasOptions& opt, Rng& rng);

// Observations minus the mean contribution of the listed chains.
ObservationSet subtract_chains(const ObservationSet& Y, const LatentMatrices& latents,
                               const Constellation& cst, const GlobalParams& g,
                               std::span<const int> chains);

// Drops all-idle columns from latents and globals; returns the kept count.
int compact(LatentMatrices& latents, GlobalParams& g);

} // namespace iffsm
