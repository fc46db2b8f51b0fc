#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "iffsm/kernels.hpp"

namespace iffsm {

// Symbol codes: 0 = idle (inactive transmitter), k >= 1 = constellation point
// k-1. Activity is derived from the code, so s == 0 <=> x == 0 holds by
// construction.
using SymCode = std::uint16_t;

class Constellation {
public:
    // "bpsk", "qpsk", "qam16", "qam64", "qam1024"; points are unit mean
    // energy, indexed in binary-reflected Gray order per axis.
    static Constellation named(const std::string& name);
    // One "re im" pair per line; '#' starts a comment. Normalized to unit
    // mean energy unless normalize is false.
    static Constellation from_file(const std::string& path, bool normalize = true);
    static Constellation from_points(std::vector<cxd> pts, bool normalize, std::string name);

    int size() const { return static_cast<int>(pts_.size()); }
    cxd point(int k) const { return pts_[static_cast<std::size_t>(k)]; }
    cxd value(SymCode c) const { return c == 0 ? cxd(0.0, 0.0) : pts_[c - 1u]; }
    const std::vector<cxd>& points() const { return pts_; }
    const std::string& name() const { return name_; }
    double mean_energy() const;

    // Unit-modulus rotations r with r*A == A as a set, sorted by angle,
    // always containing 1.
    const std::vector<cxd>& symmetry_rotations() const { return rotations_; }
    // Code permutation realizing rotation k: for any code c,
    // value(map[c]) == rotations()[k] * value(c); map[0] == 0.
    const std::vector<SymCode>& rotation_code_map(int k) const { return rot_maps_[k]; }

private:
    std::vector<cxd> pts_;
    std::string name_;
    std::vector<cxd> rotations_;
    std::vector<std::vector<SymCode>> rot_maps_;
    void finalize();
};

// Priors and derived quantities shared by the samplers. tau and nu follow the
// tap-variance hyperprior: sigma_l^2 ~ InvGamma(tau, nu_l) with mean
// sigma_h2 * exp(-lambda * l) and coefficient of variation kappa.
struct Hyperparams {
    double alpha = 1.0;  // activation stick concentration
    double beta0 = 2.0;  // persistence prior Beta(beta0, beta1)
    double beta1 = 0.1;
    double sigma_h2 = 1.0;
    double lambda = 0.5;
    double kappa = 1.0;
    // Pseudo-counts of the activation-probability update,
    // a | S ~ Beta(a_prior0 + n01, a_prior1 + n00). The default (0, 1) is the
    // nonparametric update; fixed-M runs may use a proper Beta prior instead.
    double a_prior0 = 0.0;
    double a_prior1 = 1.0;

    double tau() const { return 2.0 + 1.0 / (kappa * kappa); }
    // l is 0-based lag index
    double nu(int l) const { return (tau() - 1.0) * mean_tap_var(l); }
    double mean_tap_var(int l) const { return sigma_h2 * std::exp(-lambda * l); }
    void validate() const;
};

struct ObservationSet {
    int T = 0, D = 0;
    std::vector<cxd> data; // row-major T x D

    ObservationSet() = default;
    ObservationSet(int T_, int D_) : T(T_), D(D_), data(static_cast<std::size_t>(T_) * D_) {}
    cxd* row(int t) { return data.data() + static_cast<std::size_t>(t) * D; }
    const cxd* row(int t) const { return data.data() + static_cast<std::size_t>(t) * D; }
};

// Symbol matrix (T x M), column m = transmitter chain m.
struct LatentMatrices {
    int T = 0, M = 0;
    std::vector<SymCode> x; // row-major T x M

    LatentMatrices() = default;
    LatentMatrices(int T_, int M_) : T(T_), M(M_), x(static_cast<std::size_t>(T_) * M_, 0) {}
    SymCode at(int t, int m) const { return x[static_cast<std::size_t>(t) * M + m]; }
    SymCode& at(int t, int m) { return x[static_cast<std::size_t>(t) * M + m]; }
    const SymCode* row(int t) const { return x.data() + static_cast<std::size_t>(t) * M; }
    SymCode* row(int t) { return x.data() + static_cast<std::size_t>(t) * M; }
    bool active(int t, int m) const { return at(t, m) != 0; }
    bool column_nonzero(int m) const;
    void append_zero_column();
    void remove_column(int m);
};

// Per-chain transition probabilities and channel taps plus the shared per-lag
// tap variances. Taps are stored flat as [m][l][d], contiguous in d.
struct GlobalParams {
    int L = 1, D = 0;
    std::vector<double> a; // activation probability per chain
    std::vector<double> b; // persistence probability per chain
    std::vector<cxd> taps;
    std::vector<double> sigma_l2; // length L

    int M() const { return static_cast<int>(a.size()); }
    cxd* tap(int m, int l) { return taps.data() + (static_cast<std::size_t>(m) * L + l) * D; }
    const cxd* tap(int m, int l) const {
        return taps.data() + (static_cast<std::size_t>(m) * L + l) * D;
    }
    void append_chain(double a_m, double b_m, std::span<const cxd> chain_taps);
    void remove_chain(int m);
};

// Observation log likelihood at one time step. win holds the symbol window as
// L rows of M codes, oldest row first (row L-1 is the current step); tap lag
// l pairs with row L-1-l. scratch must hold D entries.
double loglik_obs(const cxd* y, const Constellation& cst, const GlobalParams& g,
                  std::span<const SymCode> win, double sigma_eff2, cxd* scratch);

// log p(s, x | s_prev) for one chain: Markov activity times uniform symbol
// choice. Returns -inf for inconsistent (s, x); throws std::domain_error when
// x is not idle or a constellation point.
double log_transition(int s_prev, int s, SymCode x, double a_m, double b_m,
                      const Constellation& cst);
// Same with activities derived from the codes.
double log_transition_code(SymCode prev, SymCode cur, double a_m, double b_m,
                           const Constellation& cst);

// 10 log10(D * L / sigma_y2)
double snr_db(int D, int L, double sigma_y2);

} // namespace iffsm
