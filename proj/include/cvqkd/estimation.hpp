#pragma once

// Parameter estimation and asymptotic key rate for Gaussian modulation with heterodyne
// detection and reverse reconciliation. Receiver efficiency and electronic noise are trusted.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "cvqkd/errors.hpp"
#include "cvqkd/wavecore.hpp"

namespace cvqkd {

// ---------------------------------------------------------------------------
// Moment accumulators

/// Running sums for one quadrature pair (Alice a, Bob b). Value type, mergeable.
struct PairMoments {
    double n = 0.0;
    double sa = 0.0;
    double sb = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    double sab = 0.0;

    void add(double a, double b) {
        n += 1.0;
        sa += a;
        sb += b;
        saa += a * a;
        sbb += b * b;
        sab += a * b;
    }

    PairMoments& merge(const PairMoments& o) {
        n += o.n;
        sa += o.sa;
        sb += o.sb;
        saa += o.saa;
        sbb += o.sbb;
        sab += o.sab;
        return *this;
    }

    double mean_a() const { return sa / n; }
    double mean_b() const { return sb / n; }
    double var_a() const { return saa / n - mean_a() * mean_a(); }
    double var_b() const { return sbb / n - mean_b() * mean_b(); }
    double cov() const { return sab / n - mean_a() * mean_b(); }
};

/// Per-copy statistics over both quadratures.
struct CopyMoments {
    PairMoments x;
    PairMoments p;

    CopyMoments& merge(const CopyMoments& o) {
        x.merge(o.x);
        p.merge(o.p);
        return *this;
    }

    /// C_AB: mean of Cov(X_A, X_B) and Cov(P_A, P_B).
    double c_ab() const { return 0.5 * (x.cov() + p.cov()); }
    double var_a() const { return 0.5 * (x.var_a() + p.var_a()); }
    double var_b() const { return 0.5 * (x.var_b() + p.var_b()); }

    /// Mean over quadratures of Var(B - g A).
    double conditional_variance(double g) const {
        const double vx = x.var_b() - 2.0 * g * x.cov() + g * g * x.var_a();
        const double vp = p.var_b() - 2.0 * g * p.cov() + g * g * p.var_a();
        return 0.5 * (vx + vp);
    }
};

inline CopyMoments accumulate(const SymbolBlock& tx, const SymbolBlock& rx) {
    if (tx.size() != rx.size() || tx.x.size() != tx.p.size() || rx.x.size() != rx.p.size()) {
        throw ParameterError("tx and rx symbol blocks differ in length");
    }
    detail::require(tx.size() >= 2, "need >= 2 symbols for moments");
    CopyMoments m;
    for (std::size_t k = 0; k < tx.size(); ++k) {
        m.x.add(tx.x[k], rx.x[k]);
        m.p.add(tx.p[k], rx.p[k]);
    }
    return m;
}

/// Even-indexed symbols, the half assigned to parameter estimation.
inline SymbolBlock estimation_half(const SymbolBlock& b) {
    SymbolBlock out;
    out.symbol_rate = b.symbol_rate;
    for (std::size_t k = 0; k < b.size(); k += 2) {
        out.x.push_back(b.x[k]);
        out.p.push_back(b.p[k]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Estimators

inline double transmittance_from_cab(double c_ab, double v_mod, double eta) {
    detail::require(v_mod > 0.0 && eta > 0.0, "V_mod and eta must be > 0");
    if (!(c_ab > 0.0)) {
        throw ChannelEstimationError("non-positive Alice-Bob covariance; synchronization lost");
    }
    const double r = c_ab / v_mod;
    return (2.0 / eta) * r * r;
}

inline double excess_noise_from_vba(double v_b_given_a, double t_ch, double eta, double v_en) {
    detail::require(t_ch > 0.0 && eta > 0.0, "T_ch and eta must be > 0");
    return 2.0 * (v_b_given_a - 1.0 - v_en) / (eta * t_ch);
}

/// T_ch = (2 / eta) (C_AB / V_mod)^2 for one aligned block; rx in SNU.
inline double estimate_transmittance(const SymbolBlock& tx, const SymbolBlock& rx, double v_mod, double eta) {
    return transmittance_from_cab(accumulate(tx, rx).c_ab(), v_mod, eta);
}

inline double estimate_excess_noise(const SymbolBlock& tx, const SymbolBlock& rx, double t_ch, double eta,
                                    double v_en) {
    detail::require(t_ch > 0.0, "T_ch must be > 0");
    const double g = std::sqrt(0.5 * eta * t_ch);
    return excess_noise_from_vba(accumulate(tx, rx).conditional_variance(g), t_ch, eta, v_en);
}

// ---------------------------------------------------------------------------
// Information quantities

inline double mutual_information(double v_mod, double t_ch, double eta, double xi, double v_en) {
    detail::require(v_mod >= 0.0 && t_ch >= 0.0 && eta > 0.0 && v_en >= 0.0, "invalid mutual-information inputs");
    const double snr = 0.5 * eta * t_ch * v_mod / (1.0 + v_en + 0.5 * eta * t_ch * xi);
    return std::log1p(snr) / std::log(2.0);
}

/// G(x) = (x + 1) log2(x + 1) - x log2 x, with G(0) = 0.
inline double entropy_g(double x) {
    if (x <= 0.0) {
        return 0.0;
    }
    return (x + 1.0) * std::log2(x + 1.0) - x * std::log2(x);
}

inline double entropy_of_eigenvalue(double lambda) { return entropy_g((lambda - 1.0) / 2.0); }

struct SymplecticSpectrum {
    double l1 = 1.0;
    double l2 = 1.0;
    double l3 = 1.0;
    double l4 = 1.0;
};

/// Symplectic eigenvalues of the Alice-Bob state (l1, l2) and of Eve's purification
/// conditioned on Bob's heterodyne outcome with trusted detector noise (l3, l4).
inline SymplecticSpectrum holevo_eigenvalues(double v_mod, double t_ch, double eta, double xi, double v_en) {
    detail::require(v_mod >= 0.0, "V_mod must be >= 0");
    detail::require(t_ch > 0.0 && t_ch <= 1.0 + 1e-12, "T_ch must lie in (0, 1]");
    detail::require(eta > 0.0 && eta <= 1.0, "eta must lie in (0, 1]");
    detail::require(v_en >= 0.0, "V_en must be >= 0");
    const double V = v_mod + 1.0;
    const double T = t_ch;
    const double chi_line = 1.0 / T - 1.0 + xi;
    const double chi_het = (2.0 - eta + 2.0 * v_en) / eta;
    const double chi_tot = chi_line + chi_het / T;

    const double A = V * V * (1.0 - 2.0 * T) + 2.0 * T + T * T * (V + chi_line) * (V + chi_line);
    const double B = T * T * (V * chi_line + 1.0) * (V * chi_line + 1.0);
    const double den = T * (V + chi_tot);
    const double C = (A * chi_het * chi_het + B + 1.0 + 2.0 * chi_het * (V * std::sqrt(B) + T * (V + chi_line)) +
                      2.0 * T * (V * V - 1.0)) /
                     (den * den);
    const double d = (V + std::sqrt(B) * chi_het) / den;
    const double D = d * d;

    const auto roots = [](double s, double p) {
        const double disc = s * s - 4.0 * p;
        if (disc < -1e-9 * s * s) {
            throw PhysicalityError("covariance matrix has complex symplectic eigenvalues");
        }
        const double r = std::sqrt(std::max(disc, 0.0));
        return std::pair{std::sqrt(std::max(0.5 * (s + r), 0.0)), std::sqrt(std::max(0.5 * (s - r), 0.0))};
    };
    SymplecticSpectrum sp;
    std::tie(sp.l1, sp.l2) = roots(A, B);
    std::tie(sp.l3, sp.l4) = roots(C, D);
    for (double l : {sp.l1, sp.l2, sp.l3, sp.l4}) {
        if (!(l >= 1.0 - 1e-9)) {
            throw PhysicalityError("unphysical covariance matrix (symplectic eigenvalue < 1)");
        }
    }
    return sp;
}

inline double holevo_bound(double v_mod, double t_ch, double eta, double xi, double v_en) {
    const SymplecticSpectrum s = holevo_eigenvalues(v_mod, t_ch, eta, xi, v_en);
    const double chi = entropy_of_eigenvalue(s.l1) + entropy_of_eigenvalue(s.l2) - entropy_of_eigenvalue(s.l3) -
                       entropy_of_eigenvalue(s.l4);
    return std::max(chi, 0.0);
}

struct KeyRate {
    double clamped = 0.0;  // bit/s
    double raw = 0.0;      // bit/s, may be negative
};

/// 0.5 (beta I_AB - chi_BE) R_eff with R_eff = R_s / 2.
inline KeyRate secret_key_rate(double i_ab, double chi_be, double beta, double symbol_rate) {
    detail::require(beta > 0.0 && beta <= 1.0, "beta must lie in (0, 1]");
    detail::require(symbol_rate > 0.0, "symbol rate must be > 0");
    KeyRate r;
    r.raw = 0.5 * (beta * i_ab - chi_be) * symbol_rate / 2.0;
    r.clamped = std::max(0.0, r.raw);
    return r;
}

// ---------------------------------------------------------------------------
// Ensemble estimation

struct EstimationResult {
    double v_mod = 0.0;
    double t_ch = 0.0;
    double v_en = 0.0;
    double xi_a = 0.0;
    double xi_floor = 0.0;  // delete-one-copy jackknife standard error of xi_a
    double i_ab = 0.0;
    double chi_be = std::numeric_limits<double>::quiet_NaN();
    double skr_bps = std::numeric_limits<double>::quiet_NaN();
    double skr_raw = std::numeric_limits<double>::quiet_NaN();
    std::size_t n_symbols_used = 0;
    std::size_t n_copies = 0;
    std::string status = "ok";
};

/// Per-copy summaries, averaged across copies in index order.
struct EnsembleInputs {
    std::vector<CopyMoments> copies;
    std::vector<double> v_en;  // per-copy electronic noise in SNU
};

struct EnsemblePoint {
    double t_ch = 0.0;
    double xi_a = 0.0;
    double v_en = 0.0;
};

namespace detail {

inline EnsemblePoint ensemble_point(const EnsembleInputs& in, double v_mod, double eta, std::size_t skip) {
    double c = 0.0;
    double va = 0.0;
    double vb = 0.0;
    double ven = 0.0;
    double k = 0.0;
    for (std::size_t i = 0; i < in.copies.size(); ++i) {
        if (i == skip) {
            continue;
        }
        const CopyMoments& m = in.copies[i];
        c += m.c_ab();
        va += m.var_a();
        vb += m.var_b();
        ven += in.v_en[i];
        k += 1.0;
    }
    c /= k;
    va /= k;
    vb /= k;
    ven /= k;
    EnsemblePoint p;
    p.v_en = ven;
    p.t_ch = transmittance_from_cab(c, v_mod, eta);
    const double g = std::sqrt(0.5 * eta * p.t_ch);
    // <V_B|A> over copies is linear in the per-copy variances and covariance.
    const double v_ba = vb - 2.0 * g * c + g * g * va;
    p.xi_a = excess_noise_from_vba(v_ba, p.t_ch, eta, ven);
    return p;
}

}  // namespace detail

/// Ensemble reduction: C_AB and V_B|A are averaged over the copies first, then the formulas applied.
inline EstimationResult estimate_ensemble(const EnsembleInputs& in, double v_mod, double eta, double beta,
                                          double symbol_rate) {
    detail::require(!in.copies.empty() && in.copies.size() == in.v_en.size(), "ensemble inputs are empty");
    EstimationResult r;
    r.v_mod = v_mod;
    r.n_copies = in.copies.size();
    r.n_symbols_used = static_cast<std::size_t>(in.copies.front().x.n);
    const EnsemblePoint p = detail::ensemble_point(in, v_mod, eta, in.copies.size());
    r.t_ch = p.t_ch;
    r.xi_a = p.xi_a;
    r.v_en = p.v_en;
    if (in.copies.size() >= 2) {
        const auto k = static_cast<double>(in.copies.size());
        std::vector<double> loo(in.copies.size());
        double mean = 0.0;
        for (std::size_t i = 0; i < in.copies.size(); ++i) {
            loo[i] = detail::ensemble_point(in, v_mod, eta, i).xi_a;
            mean += loo[i];
        }
        mean /= k;
        double ss = 0.0;
        for (double v : loo) {
            ss += (v - mean) * (v - mean);
        }
        r.xi_floor = std::sqrt((k - 1.0) / k * ss);
    }
    r.i_ab = mutual_information(v_mod, std::min(r.t_ch, 1.0), eta, r.xi_a, r.v_en);
    try {
        r.chi_be = holevo_bound(v_mod, std::min(r.t_ch, 1.0), eta, r.xi_a, r.v_en);
        const KeyRate kr = secret_key_rate(r.i_ab, r.chi_be, beta, symbol_rate);
        r.skr_bps = kr.clamped;
        r.skr_raw = kr.raw;
    } catch (const PhysicalityError&) {
        r.status = "unphysical";
    }
    if (r.t_ch > 1.0) {
        r.status = r.status == "ok" ? "t_ch_above_one" : r.status;
    }
    return r;
}

}  // namespace cvqkd
