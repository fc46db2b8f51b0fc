#pragma once

#include <utility>

#include "iffsm/model.hpp"
#include "iffsm/rng.hpp"

namespace iffsm {

// Minimum activation probability over instantiated chains; 1 when none exist
// (cold start), so the slice is Uniform(0, 1).
double active_a_min(const GlobalParams& g);

// How the birth slice variable is drawn.
//
// `power` draws theta = u^4 / T with u uniform on (0, 1) regardless of the
// current chains. Because the draw does not depend on the state, the column
// resampling step needs no correction factor for it; pairing it with a
// descent bound of 1 in extend_chains regenerates the idle pool on
// (theta, 1) exactly, and sweeping only the chains whose sticks exceed theta
// keeps the swept set a function of the sticks alone. Together these hold
// the chain-count distribution in exact balance (the prior-reproduction test
// exercises this). The 1/T scale puts theta where the idle-pool intensity
// actually has mass, so established chains (sticks of a few times 1/T and
// up) are essentially never held back from the sweep. The other two modes
// tie the slice to the smallest active stick: they concentrate candidates
// just below it, which biases the equilibrium chain count low, but they are
// kept for comparison runs.
enum class SliceMode {
    power,   // theta = u^4 / T on (0, 1/T]; state-independent (default)
    uniform, // theta ~ Uniform(0, a_min)
    beta,    // theta ~ a_min * Beta(1, 5)
};

// Slice variable for the given mode over a length-T horizon. a_min is
// ignored by `power`; T is only used by `power`.
double draw_slice(double a_min, SliceMode mode, int T, Rng& rng);

// Log density (and d/du) of the next stick in u = log a space:
//   log p = alpha * sum_{t=1..T} (1-a)^t / t + alpha*u + T*log(1-a),  a = e^u,
// which is concave in u. The truncation to a <= a_prev is handled by the
// sampler bound, not the density.
std::pair<double, double> birth_logdensity_u(double u, double alpha, int T);

struct BirthResult {
    int n_born = 0;
    int ars_fallbacks = 0;
};

// Instantiates new idle chains by descending sticks until one falls below
// theta: a from the birth density (truncated to the running minimum), b from
// Beta(beta0, beta1), taps from CN(0, sigma_l2[l] I_D), symbols all idle.
// max_total caps the chain count (0 = only the internal safety limit).
// upper sets where the descent starts: 0 means the smallest instantiated
// stick (for the adaptive slice modes); pass 1 with the state-independent
// slice so chains with sticks above the current minimum can also be born.
BirthResult extend_chains(LatentMatrices& latents, GlobalParams& g, const Hyperparams& hyper,
                          double theta, Rng& rng, int max_total = 0, double upper = 0.0);

} // namespace iffsm
