#include "iffsm/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace iffsm {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

// ==== complex gaussian ======================================================

void sample_cgauss(cxd* out, const cxd* mean, double sigma2, std::size_t n, Rng& rng) {
    if (sigma2 < 0.0) throw std::invalid_argument("sample_cgauss: negative variance");
    if (sigma2 == 0.0) {
        for (std::size_t i = 0; i < n; ++i) out[i] = mean ? mean[i] : cxd(0.0, 0.0);
        return;
    }
    const double s = std::sqrt(0.5 * sigma2);
    for (std::size_t i = 0; i < n; ++i) {
        const cxd mu = mean ? mean[i] : cxd(0.0, 0.0);
        out[i] = mu + cxd(s * rng.normal(), s * rng.normal());
    }
}

std::vector<cxd> sample_cgauss(const std::vector<cxd>& mean, double sigma2, Rng& rng) {
    std::vector<cxd> out(mean.size());
    sample_cgauss(out.data(), mean.data(), sigma2, mean.size(), rng);
    return out;
}

double logpdf_cgauss_iso(const cxd* x, const cxd* mean, std::size_t n, double sigma2) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("logpdf_cgauss_iso: variance must be positive");
    const double r2 = kernels::active().residual_norm2(x, mean, n);
    return -static_cast<double>(n) * std::log(std::numbers::pi * sigma2) - r2 / sigma2;
}

// ==== log weights ===========================================================

double logsumexp(std::span<const double> v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

void normalize_log_weights(std::span<const double> logw, std::span<double> probs) {
    if (logw.size() != probs.size())
        throw std::invalid_argument("normalize_log_weights: size mismatch");
    double m = kNegInf;
    for (double x : logw) m = std::max(m, x);
    if (!std::isfinite(m)) throw std::domain_error("normalize_log_weights: no finite log weight");
    double s = 0.0;
    for (std::size_t i = 0; i < logw.size(); ++i) {
        probs[i] = std::exp(logw[i] - m);
        s += probs[i];
    }
    for (double& p : probs) p /= s;
}

std::vector<double> normalize_log_weights(std::span<const double> logw) {
    std::vector<double> probs(logw.size());
    normalize_log_weights(logw, probs);
    return probs;
}

int sample_categorical(std::span<const double> probs, Rng& rng) {
    const double u = rng.u01();
    double c = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        c += probs[i];
        if (u < c) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

int sample_categorical_log(std::span<const double> logw, Rng& rng) {
    std::vector<double> probs = normalize_log_weights(logw);
    return sample_categorical(probs, rng);
}

namespace {

std::vector<double> cumulative_from_log(std::span<const double> logw) {
    std::vector<double> cum(logw.size());
    double m = kNegInf;
    for (double x : logw) m = std::max(m, x);
    if (!std::isfinite(m)) throw std::domain_error("resample: no finite log weight");
    double s = 0.0;
    for (std::size_t i = 0; i < logw.size(); ++i) {
        s += std::exp(logw[i] - m);
        cum[i] = s;
    }
    return cum;
}

} // namespace

void resample_ancestors(std::span<const double> logw, std::span<int> out, Rng& rng) {
    const std::vector<double> cum = cumulative_from_log(logw);
    const double total = cum.back();
    for (int& o : out) {
        const double u = rng.u01() * total;
        o = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
        if (o >= static_cast<int>(cum.size())) o = static_cast<int>(cum.size()) - 1;
    }
}

void resample_systematic(std::span<const double> logw, std::span<int> out, Rng& rng) {
    const std::vector<double> cum = cumulative_from_log(logw);
    const double total = cum.back();
    const std::size_t n = out.size();
    const double step = total / static_cast<double>(n);
    double u = rng.u01() * step;
    std::size_t j = 0;
    for (std::size_t k = 0; k < n; ++k) {
        while (j + 1 < cum.size() && cum[j] <= u) ++j;
        out[k] = static_cast<int>(j);
        u += step;
    }
}

// ==== adaptive rejection sampling ===========================================

namespace {

struct HullPoint {
    double x, h, dh;
};

// log of integral of exp(h + dh*(x - x0)) over [za, zb], za may be -inf
double log_segment_mass(double h, double dh, double x0, double za, double zb) {
    if (std::abs(dh) < 1e-12) {
        if (!std::isfinite(za)) return std::numeric_limits<double>::infinity();
        return h + std::log(zb - za);
    }
    const double u1 = std::isfinite(za) ? dh * (za - x0) : (dh > 0 ? kNegInf : 0.0);
    if (!std::isfinite(za) && dh < 0) return std::numeric_limits<double>::infinity();
    const double u2 = dh * (zb - x0);
    const double hi = std::max(u1, u2), lo = std::min(u1, u2);
    return h + hi + std::log1p(-std::exp(lo - hi)) - std::log(std::abs(dh));
}

// inverse CDF within one exponential segment
double sample_segment(double dh, double za, double zb, double v) {
    if (!std::isfinite(za)) return zb + std::log(v) / dh; // requires dh > 0
    if (std::abs(dh) < 1e-12) return za + v * (zb - za);
    return za + std::log1p(v * std::expm1(dh * (zb - za))) / dh;
}

} // namespace

double grid_sample_logdensity(const std::function<double(double)>& logf, double lo, double hi,
                              int npts, Rng& rng) {
    if (!(std::isfinite(lo) && std::isfinite(hi)) || !(hi > lo))
        throw std::invalid_argument("grid_sample_logdensity: bad interval");
    if (npts < 2) throw std::invalid_argument("grid_sample_logdensity: npts < 2");
    const double dx = (hi - lo) / (npts - 1);
    std::vector<double> lw(npts);
    double m = kNegInf;
    for (int j = 0; j < npts; ++j) {
        lw[j] = logf(lo + j * dx);
        m = std::max(m, lw[j]);
    }
    if (!std::isfinite(m)) throw std::domain_error("grid_sample_logdensity: density vanishes on grid");
    std::vector<double> cellcum(npts - 1);
    double s = 0.0;
    for (int j = 0; j + 1 < npts; ++j) {
        const double w0 = std::exp(lw[j] - m), w1 = std::exp(lw[j + 1] - m);
        s += 0.5 * (w0 + w1);
        cellcum[j] = s;
    }
    const double u = rng.u01() * s;
    const auto it = std::upper_bound(cellcum.begin(), cellcum.end(), u);
    int j = static_cast<int>(it - cellcum.begin());
    if (j >= npts - 1) j = npts - 2;
    const double prev = (j == 0) ? 0.0 : cellcum[j - 1];
    const double frac = (cellcum[j] > prev) ? (u - prev) / (cellcum[j] - prev) : 0.5;
    return lo + (j + frac) * dx;
}

double ars_sample_logconcave(const std::function<std::pair<double, double>(double)>& logf,
                             double lower, double upper, Rng& rng, bool* used_fallback) {
    if (used_fallback) *used_fallback = false;
    if (!std::isfinite(upper)) throw std::invalid_argument("ars: upper bound must be finite");

    constexpr int kMaxEvals = 120;
    constexpr double kConcavityTol = 1e-8;
    int evals = 0;
    double probe_min = upper;

    auto eval = [&](double x) {
        ++evals;
        probe_min = std::min(probe_min, x);
        auto [h, dh] = logf(x);
        return HullPoint{x, h, dh};
    };

    auto fallback = [&]() {
        if (used_fallback) *used_fallback = true;
        double lo = std::isfinite(lower) ? lower : probe_min - 20.0 * (upper - probe_min + 1.0);
        return grid_sample_logdensity([&](double x) { return logf(x).first; }, lo, upper, 4096,
                                      rng);
    };

    // Initial abscissae: walk left from the upper bound until the log density
    // is finite, then (for unbounded support) until the slope is positive.
    std::vector<HullPoint> pts;
    {
        const double span = std::isfinite(lower) ? (upper - lower) : 2.0;
        double x0 = std::isfinite(lower) ? upper - 0.25 * span : upper - 0.5 * span;
        double step = 0.25 * span;
        HullPoint p = eval(x0);
        while (!std::isfinite(p.h) && evals < 40) {
            x0 -= step;
            if (std::isfinite(lower) && x0 <= lower) x0 = 0.5 * (lower + x0 + step);
            p = eval(x0);
            step *= 1.5;
        }
        if (!std::isfinite(p.h)) return fallback();
        pts.push_back(p);
        if (!std::isfinite(lower)) {
            step = 1.0;
            while (pts.front().dh <= 0.0 && evals < 70) {
                HullPoint q = eval(pts.front().x - step);
                if (std::isfinite(q.h)) pts.insert(pts.begin(), q);
                step *= 2.0;
            }
            if (pts.front().dh <= 0.0)
                throw std::domain_error("ars: density not integrable on unbounded support");
        }
        // one interior point right of the first, if the bound allows
        if (pts.back().x < upper) {
            HullPoint q = eval(0.5 * (pts.back().x + upper));
            if (std::isfinite(q.h)) pts.push_back(q);
        }
    }

    std::sort(pts.begin(), pts.end(), [](const HullPoint& a, const HullPoint& b) { return a.x < b.x; });

    auto concavity_ok = [&]() {
        for (std::size_t i = 0; i + 1 < pts.size(); ++i)
            if (pts[i].dh < pts[i + 1].dh - kConcavityTol) return false;
        return true;
    };
    if (!concavity_ok()) return fallback();

    while (evals < kMaxEvals) {
        const std::size_t k = pts.size();
        // tangent intersections z[0..k]: z[0] = lower, z[k] = upper
        std::vector<double> z(k + 1);
        z[0] = lower;
        z[k] = upper;
        bool bad = false;
        for (std::size_t i = 0; i + 1 < k; ++i) {
            const HullPoint &p = pts[i], &q = pts[i + 1];
            const double denom = p.dh - q.dh;
            double zi = (std::abs(denom) < 1e-14)
                            ? 0.5 * (p.x + q.x)
                            : (q.h - p.h - q.x * q.dh + p.x * p.dh) / denom;
            if (!(zi >= p.x - 1e-9) || !(zi <= q.x + 1e-9)) bad = true;
            z[i + 1] = std::clamp(zi, p.x, q.x);
        }
        if (bad) return fallback();

        std::vector<double> lm(k);
        for (std::size_t i = 0; i < k; ++i) {
            lm[i] = log_segment_mass(pts[i].h, pts[i].dh, pts[i].x, z[i], z[i + 1]);
            if (std::isinf(lm[i]) && lm[i] > 0) return fallback();
        }
        const std::vector<double> probs = normalize_log_weights(lm);
        const int seg = sample_categorical(probs, rng);
        const double x = sample_segment(pts[seg].dh, z[seg], z[seg + 1], rng.u01());
        if (!std::isfinite(x)) return fallback();

        const double upper_env = pts[seg].h + pts[seg].dh * (x - pts[seg].x);
        // squeeze from the chord between neighbouring abscissae
        double lower_env = kNegInf;
        {
            auto it = std::upper_bound(pts.begin(), pts.end(), x,
                                       [](double v, const HullPoint& p) { return v < p.x; });
            if (it != pts.begin() && it != pts.end()) {
                const HullPoint &a = *(it - 1), &b = *it;
                lower_env = ((b.x - x) * a.h + (x - a.x) * b.h) / (b.x - a.x);
            }
        }
        const double u = rng.u01();
        if (u <= std::exp(lower_env - upper_env)) return x;

        const HullPoint p = eval(x);
        if (std::isfinite(p.h) && p.h > upper_env + kConcavityTol) return fallback();
        if (u <= std::exp(p.h - upper_env)) return x;
        if (std::isfinite(p.h)) {
            pts.insert(std::upper_bound(pts.begin(), pts.end(), p.x,
                                        [](double v, const HullPoint& q) { return v < q.x; }),
                       p);
            if (!concavity_ok()) return fallback();
        }
    }
    return fallback();
}

} // namespace iffsm
