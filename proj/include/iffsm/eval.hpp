#pragma once

#include <span>

#include "iffsm/model.hpp"
#include "iffsm/simulator.hpp"

namespace iffsm {

// Component-wise majority vote over a window of trajectory samples (all with
// the same shape); ties break toward the lower code, idle first.
LatentMatrices vote_map_symbols(std::span<const LatentMatrices> window);

struct MapEstimate {
    LatentMatrices latents;
    std::vector<cxd> taps; // [m][l][d], posterior-mean channel given latents
    int L = 1, D = 0;
};

// Symbol MAP by majority vote plus the conditional posterior-mean channel
// estimate given those symbols.
MapEstimate map_estimate(std::span<const LatentMatrices> window, const ObservationSet& Y,
                         const Constellation& cst, int L, std::span<const double> sigma_l2,
                         double sigma_y2);

struct Alignment {
    std::vector<int> chain_to_user; // per inferred chain; -1 = spurious
    std::vector<int> rotation;      // symmetry-group index per inferred chain
    int matched = 0;
};

// Injective assignment of inferred chains to true transmitters minimizing
// total channel MSE, where each pair's MSE is first minimized over the
// constellation's rotation symmetry group applied jointly to the estimated
// taps and symbols. Exactly min(M, N) pairs are matched.
Alignment align_chains(const MapEstimate& est, const ChannelTaps& truth, const Constellation& cst);

struct Metrics {
    int m_plus = 0;    // inferred chain count
    int matched = 0;   // aligned pairs
    int recovered = 0; // pairs whose SER over the true active window < threshold
    double ader = 0.0; // activity detection error rate over matched pairs
    double ser = 0.0;  // symbol error rate over matched pairs (idle symbol = 0)
    std::vector<double> mse; // per matched pair
    double mse_mean = 0.0;
};

Metrics compute_metrics(const MapEstimate& est, const Alignment& al, const LatentMatrices& truth_x,
                        const ChannelTaps& truth_h, const Constellation& cst,
                        double recovered_threshold = 0.5);

// Box-plot statistics; percentiles use linear interpolation at q*(n-1).
struct BoxStats {
    double p25 = 0.0, p50 = 0.0, p75 = 0.0;
    double min = 0.0, max = 0.0, mean = 0.0;
};

BoxStats summarize_values(std::span<const double> values);

} // namespace iffsm
