#pragma once

#include <iosfwd>
#include <span>

#include "iffsm/mibp.hpp"
#include "iffsm/model.hpp"
#include "iffsm/pgas.hpp"
#include "iffsm/rng.hpp"

namespace iffsm {

struct TransitionCounts {
    int n00 = 0, n01 = 0, n10 = 0, n11 = 0;
};

// Transition counts of one activity column with s_0 = 0; entries sum to T.
TransitionCounts count_transitions(const LatentMatrices& latents, int m);

// a_m | S ~ Beta(a_prior0 + n01, a_prior1 + n00) (the default prior counts
// (0, 1) give the nonparametric update and require n01 >= 1);
// b_m | S ~ Beta(beta0 + n11, beta1 + n10).
void sample_transition_probs(const LatentMatrices& latents, GlobalParams& g,
                             const Hyperparams& hyper, Rng& rng);

// Joint conditional of all taps given symbols: per-antenna Gaussian with a
// shared posterior covariance over the L*M extended regressors.
void sample_channels(const ObservationSet& Y, const LatentMatrices& latents,
                     const Constellation& cst, GlobalParams& g, const Hyperparams& hyper,
                     double sigma_eff2, Rng& rng);

// Posterior mean of the same conditional (used for channel point estimates);
// layout matches GlobalParams::taps for M = latents.M chains.
std::vector<cxd> channel_posterior_mean(const ObservationSet& Y, const LatentMatrices& latents,
                                        const Constellation& cst, int L,
                                        std::span<const double> sigma_l2, double sigma_eff2);

// sigma_l^2 | taps ~ InvGamma(tau + D*M, nu_l + sum_m ||h_m^l||^2).
void sample_tap_variances(GlobalParams& g, const Hyperparams& hyper, Rng& rng);

struct TemperSchedule {
    enum class Mode { off, geometric, linear_db };
    Mode mode = Mode::off;
    double sigma_y2 = 1.0;
    double sigma_start2 = 1.0;
    double decay = 0.9995;  // geometric mode
    int temper_iters = 0;   // sigma_eff2 == sigma_y2 from this iteration on

    // Monotone nonincreasing in iter; exactly sigma_y2 for
    // iter >= temper_iters.
    double effective(int iter) const;
    void validate() const;
};

struct SamplerOptions {
    bool birth = true;           // slice + chain extension
    bool compact_chains = true;  // drop all-idle chains after the sweep
    bool update_globals = true;  // conjugate parameter updates
    SliceMode slice = SliceMode::power; // birth slice distribution
    int block_size = 0;          // 0 = one joint sweep over all chains
    int max_chains = 0;          // 0 = internal safety cap only
    PgasOptions pgas;
};

struct SamplerState {
    LatentMatrices latents;
    GlobalParams globals;
    int iter = 0;
    double sigma_eff2 = 0.0;
    double loglik = 0.0; // observation log likelihood at sigma_eff2
    long ars_fallbacks = 0;
};

// Cold start: no active symbols, one all-idle chain drawn from the prior.
SamplerState init_state(int T, int L, int D, const Hyperparams& hyper, Rng& rng);

// One sweep of the three-step sampler: chain birth (slice), conditional
// trajectory update (particle sweep, optionally blockwise), conjugate
// parameter updates. Updates state.iter, state.sigma_eff2, state.loglik.
void full_iteration(SamplerState& state, const ObservationSet& Y, const Constellation& cst,
                    const Hyperparams& hyper, const TemperSchedule& schedule,
                    const SamplerOptions& opt, Rng& rng);

// sum_t log p(y_t | window) at the given noise variance.
double observation_loglik(const ObservationSet& Y, const LatentMatrices& latents,
                          const Constellation& cst, const GlobalParams& g, double sigma2);

// Line-oriented snapshot of the sampler state (iteration, noise level,
// likelihood, globals, symbols). read_snapshot inverts write_snapshot
// bit-exactly.
void write_snapshot(std::ostream& os, const SamplerState& state);
SamplerState read_snapshot(std::istream& is);

} // namespace iffsm
