#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "iffsm/kernels.hpp"
#include "iffsm/rng.hpp"

namespace iffsm {

// Circularly symmetric complex Gaussian with total variance sigma2 per entry
// (sigma2/2 per real and imaginary part). sigma2 == 0 returns the mean
// exactly.
void sample_cgauss(cxd* out, const cxd* mean, double sigma2, std::size_t n, Rng& rng);
std::vector<cxd> sample_cgauss(const std::vector<cxd>& mean, double sigma2, Rng& rng);

// log density of the same distribution: -n ln(pi sigma2) - sum|x-mu|^2 / sigma2
double logpdf_cgauss_iso(const cxd* x, const cxd* mean, std::size_t n, double sigma2);

double logsumexp(std::span<const double> v);

// Normalized probabilities from unnormalized log weights (max-shifted).
// Throws std::domain_error when no entry is finite.
void normalize_log_weights(std::span<const double> logw, std::span<double> probs);
std::vector<double> normalize_log_weights(std::span<const double> logw);

// One categorical draw from normalized probabilities.
int sample_categorical(std::span<const double> probs, Rng& rng);
// One categorical draw from unnormalized log weights.
int sample_categorical_log(std::span<const double> logw, Rng& rng);

// out.size() iid multinomial draws from softmax(logw).
void resample_ancestors(std::span<const double> logw, std::span<int> out, Rng& rng);
// Systematic (stratified single-uniform) variant.
void resample_systematic(std::span<const double> logw, std::span<int> out, Rng& rng);

// Adaptive rejection sampling for a log-concave density on (lower, upper].
// logf returns {log density, d/dx log density}, both up to a shared additive
// constant; upper must be finite, lower may be -infinity when the density
// decays to the left. Detected concavity violations or hull failures fall
// back to the grid inverse-CDF sampler below and set *used_fallback.
double ars_sample_logconcave(const std::function<std::pair<double, double>(double)>& logf,
                             double lower, double upper, Rng& rng,
                             bool* used_fallback = nullptr);

// Fallback and test oracle: evaluates logf at npts uniformly spaced points on
// [lo, hi] (lo finite) and inverts the resulting piecewise-linear CDF.
double grid_sample_logdensity(const std::function<double(double)>& logf, double lo, double hi,
                              int npts, Rng& rng);

} // namespace iffsm
