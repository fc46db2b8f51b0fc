#include "iffsm/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "iffsm/numerics.hpp"

namespace iffsm {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::uint32_t gray(std::uint32_t g) { return g ^ (g >> 1); }
} // namespace

// ==== constellation =========================================================

double Constellation::mean_energy() const {
    double e = 0.0;
    for (const cxd& p : pts_) e += std::norm(p);
    return e / static_cast<double>(pts_.size());
}

Constellation Constellation::from_points(std::vector<cxd> pts, bool normalize, std::string name) {
    if (pts.empty()) throw std::invalid_argument("constellation: no points");
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (std::abs(pts[i]) == 0.0)
            throw std::invalid_argument("constellation: zero point clashes with the idle symbol");
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(pts[i] - pts[j]) < 1e-12)
                throw std::invalid_argument("constellation: duplicate point");
    }
    Constellation c;
    c.pts_ = std::move(pts);
    c.name_ = std::move(name);
    if (normalize) {
        const double s = std::sqrt(c.mean_energy());
        for (cxd& p : c.pts_) p /= s;
    }
    c.finalize();
    return c;
}

// Square QAM over odd-integer PAM levels, indexed in Gray order per axis with
// the all-zero index at the positive corner, then scaled to unit mean energy.
Constellation Constellation::named(const std::string& name) {
    int q = 0; // levels per axis
    if (name == "bpsk") {
        std::vector<cxd> pts{cxd(1.0, 0.0), cxd(-1.0, 0.0)};
        return from_points(std::move(pts), true, name);
    } else if (name == "qpsk") {
        q = 2;
    } else if (name == "qam16") {
        q = 4;
    } else if (name == "qam64") {
        q = 8;
    } else if (name == "qam1024") {
        q = 32;
    } else {
        throw std::invalid_argument("unknown constellation: " + name);
    }
    const int bits = static_cast<int>(std::lround(std::log2(q)));
    std::vector<cxd> pts;
    pts.reserve(static_cast<std::size_t>(q) * q);
    for (int k = 0; k < q * q; ++k) {
        const std::uint32_t ki = static_cast<std::uint32_t>(k) >> bits;
        const std::uint32_t kq = static_cast<std::uint32_t>(k) & ((1u << bits) - 1u);
        const double re = (q - 1.0) - 2.0 * gray(ki);
        const double im = (q - 1.0) - 2.0 * gray(kq);
        pts.emplace_back(re, im);
    }
    return from_points(std::move(pts), true, name);
}

Constellation Constellation::from_file(const std::string& path, bool normalize) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("constellation file: cannot open " + path);
    std::vector<cxd> pts;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double re, im;
        if (!(ls >> re)) continue; // blank
        if (!(ls >> im))
            throw std::runtime_error("constellation file: line " + std::to_string(lineno) +
                                     ": expected 're im'");
        std::string rest;
        if (ls >> rest)
            throw std::runtime_error("constellation file: line " + std::to_string(lineno) +
                                     ": trailing tokens");
        pts.emplace_back(re, im);
    }
    return from_points(std::move(pts), normalize, path);
}

namespace {

// tolerance-aware membership map over quantized coordinates
class PointIndex {
public:
    explicit PointIndex(const std::vector<cxd>& pts) : pts_(pts) {
        for (std::size_t i = 0; i < pts.size(); ++i) map_.emplace(key(pts[i]), i);
    }
    bool contains(cxd v) const {
        const auto [kr, ki] = key(v);
        for (long dr = -1; dr <= 1; ++dr)
            for (long di = -1; di <= 1; ++di) {
                auto range = map_.equal_range({kr + dr, ki + di});
                for (auto it = range.first; it != range.second; ++it)
                    if (std::abs(pts_[it->second] - v) < 1e-9) return true;
            }
        return false;
    }
    int find(cxd v) const {
        const auto [kr, ki] = key(v);
        for (long dr = -1; dr <= 1; ++dr)
            for (long di = -1; di <= 1; ++di) {
                auto range = map_.equal_range({kr + dr, ki + di});
                for (auto it = range.first; it != range.second; ++it)
                    if (std::abs(pts_[it->second] - v) < 1e-9) return static_cast<int>(it->second);
            }
        return -1;
    }

private:
    static std::pair<long, long> key(cxd v) {
        return {std::lround(v.real() * 1e6), std::lround(v.imag() * 1e6)};
    }
    struct KeyHash {
        std::size_t operator()(const std::pair<long, long>& k) const {
            return std::hash<long>()(k.first) * 1000003u ^ std::hash<long>()(k.second);
        }
    };
    const std::vector<cxd>& pts_;
    std::unordered_multimap<std::pair<long, long>, std::size_t, KeyHash> map_;
};

} // namespace

void Constellation::finalize() {
    const PointIndex idx(pts_);
    // candidate rotations: ratios of equal-modulus points
    std::vector<cxd> cands{cxd(1.0, 0.0)};
    for (std::size_t i = 0; i < pts_.size(); ++i)
        for (std::size_t j = 0; j < pts_.size(); ++j) {
            if (i == j) continue;
            if (std::abs(std::abs(pts_[i]) - std::abs(pts_[j])) > 1e-9) continue;
            const cxd r = pts_[j] / pts_[i];
            bool dup = false;
            for (const cxd& c : cands)
                if (std::abs(c - r) < 1e-9) {
                    dup = true;
                    break;
                }
            if (!dup) cands.push_back(r);
        }
    for (const cxd& r : cands) {
        bool ok = true;
        for (const cxd& p : pts_)
            if (!idx.contains(r * p)) {
                ok = false;
                break;
            }
        if (ok) rotations_.push_back(r);
    }
    std::sort(rotations_.begin(), rotations_.end(), [](cxd u, cxd v) {
        double au = std::arg(u), av = std::arg(v);
        if (au < -1e-12) au += 2.0 * std::numbers::pi;
        if (av < -1e-12) av += 2.0 * std::numbers::pi;
        return au < av;
    });
    rot_maps_.resize(rotations_.size());
    for (std::size_t k = 0; k < rotations_.size(); ++k) {
        auto& map = rot_maps_[k];
        map.assign(pts_.size() + 1, 0);
        for (std::size_t c = 1; c <= pts_.size(); ++c) {
            const int j = idx.find(rotations_[k] * pts_[c - 1]);
            if (j < 0) throw std::logic_error("constellation: rotation map inconsistent");
            map[c] = static_cast<SymCode>(j + 1);
        }
    }
}

// ==== hyperparams ===========================================================

void Hyperparams::validate() const {
    auto pos = [](double v, const char* what) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument(std::string("hyperparams: ") + what + " must be positive");
    };
    pos(alpha, "alpha");
    pos(beta0, "beta0");
    pos(beta1, "beta1");
    pos(sigma_h2, "sigma_h2");
    pos(kappa, "kappa");
    if (lambda < 0.0 || !std::isfinite(lambda))
        throw std::invalid_argument("hyperparams: lambda must be nonnegative");
    if (a_prior0 < 0.0 || a_prior1 < 0.0)
        throw std::invalid_argument("hyperparams: transition pseudo-counts must be nonnegative");
}

// ==== latent matrices / globals =============================================

bool LatentMatrices::column_nonzero(int m) const {
    for (int t = 0; t < T; ++t)
        if (at(t, m) != 0) return true;
    return false;
}

void LatentMatrices::append_zero_column() {
    std::vector<SymCode> nx(static_cast<std::size_t>(T) * (M + 1), 0);
    for (int t = 0; t < T; ++t)
        std::copy_n(x.begin() + static_cast<std::size_t>(t) * M, M,
                    nx.begin() + static_cast<std::size_t>(t) * (M + 1));
    x = std::move(nx);
    ++M;
}

void LatentMatrices::remove_column(int m) {
    std::vector<SymCode> nx(static_cast<std::size_t>(T) * (M - 1));
    for (int t = 0; t < T; ++t) {
        const SymCode* src = row(t);
        SymCode* dst = nx.data() + static_cast<std::size_t>(t) * (M - 1);
        for (int j = 0, k = 0; j < M; ++j)
            if (j != m) dst[k++] = src[j];
    }
    x = std::move(nx);
    --M;
}

void GlobalParams::append_chain(double a_m, double b_m, std::span<const cxd> chain_taps) {
    if (chain_taps.size() != static_cast<std::size_t>(L) * D)
        throw std::invalid_argument("append_chain: tap block size mismatch");
    a.push_back(a_m);
    b.push_back(b_m);
    taps.insert(taps.end(), chain_taps.begin(), chain_taps.end());
}

void GlobalParams::remove_chain(int m) {
    a.erase(a.begin() + m);
    b.erase(b.begin() + m);
    const std::size_t blk = static_cast<std::size_t>(L) * D;
    taps.erase(taps.begin() + m * blk, taps.begin() + (m + 1) * blk);
}

// ==== densities =============================================================

double loglik_obs(const cxd* y, const Constellation& cst, const GlobalParams& g,
                  std::span<const SymCode> win, double sigma_eff2, cxd* scratch) {
    const int M = g.M(), L = g.L, D = g.D;
    if (win.size() != static_cast<std::size_t>(L) * M)
        throw std::invalid_argument("loglik_obs: window size mismatch");
    std::fill_n(scratch, D, cxd(0.0, 0.0));
    const auto& K = kernels::active();
    for (int l = 0; l < L; ++l) {
        const SymCode* row = win.data() + static_cast<std::size_t>(L - 1 - l) * M;
        for (int m = 0; m < M; ++m) {
            const SymCode c = row[m];
            if (c == 0) continue;
            K.caxpy(scratch, g.tap(m, l), cst.value(c), static_cast<std::size_t>(D));
        }
    }
    const double r2 = K.residual_norm2(y, scratch, static_cast<std::size_t>(D));
    return -D * std::log(std::numbers::pi * sigma_eff2) - r2 / sigma_eff2;
}

double log_transition(int s_prev, int s, SymCode x, double a_m, double b_m,
                      const Constellation& cst) {
    if (x > static_cast<SymCode>(cst.size()))
        throw std::domain_error("log_transition: symbol code outside constellation");
    if ((s != 0) != (x != 0)) return kNegInf;
    const double p_active = (s_prev != 0) ? b_m : a_m;
    if (s != 0) return std::log(p_active) - std::log(static_cast<double>(cst.size()));
    return std::log1p(-p_active);
}

double log_transition_code(SymCode prev, SymCode cur, double a_m, double b_m,
                           const Constellation& cst) {
    return log_transition(prev != 0 ? 1 : 0, cur != 0 ? 1 : 0, cur, a_m, b_m, cst);
}

double snr_db(int D, int L, double sigma_y2) {
    if (D <= 0 || L <= 0 || !(sigma_y2 > 0.0))
        throw std::invalid_argument("snr_db: D, L, sigma_y2 must be positive");
    return 10.0 * std::log10(static_cast<double>(D) * L / sigma_y2);
}

} // namespace iffsm
