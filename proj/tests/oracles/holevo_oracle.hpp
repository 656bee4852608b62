#pragma once

// Holevo information for Gaussian-modulated coherent states with heterodyne detection and a
// trusted noisy detector, built from explicit covariance matrices and symplectic eigenvalues.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace oracle {

// Extended precision: the trusted-noise EPR variance grows as 1 / (1 - eta) and a conditional
// eigenvalue sits near 1, where g has infinite slope.
using Real = long double;
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using Mat2 = Eigen::Matrix<Real, 2, 2>;
using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using CMat = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

inline Real g_entropy(Real nu) {
    if (nu <= 1.0L + 1e-18L) {
        return 0.0L;
    }
    const Real a = (nu + 1.0L) / 2.0L;
    const Real b = (nu - 1.0L) / 2.0L;
    return a * std::log2(a) - b * std::log2(b);
}

inline Mat2 omega() {
    Mat2 w;
    w << 0.0L, 1.0L, -1.0L, 0.0L;
    return w;
}

/// Symplectic eigenvalues: moduli of the eigenvalues of i Omega gamma.
inline Vec symplectic_eigenvalues(const Mat& gamma) {
    const long n = gamma.rows() / 2;
    Mat big_omega = Mat::Zero(gamma.rows(), gamma.cols());
    for (long k = 0; k < n; ++k) {
        big_omega.block(2 * k, 2 * k, 2, 2) = omega();
    }
    const CMat m = std::complex<Real>(0.0L, 1.0L) * (big_omega * gamma).template cast<std::complex<Real>>();
    const Eigen::ComplexEigenSolver<CMat> solver(m, false);
    const auto& ev = solver.eigenvalues();
    std::vector<Real> mags(static_cast<std::size_t>(ev.size()));
    for (long i = 0; i < ev.size(); ++i) {
        mags[static_cast<std::size_t>(i)] = std::abs(ev(i));
    }
    std::sort(mags.begin(), mags.end());
    Vec out(n);
    for (long k = 0; k < n; ++k) {
        out(k) = 0.5L * (mags[static_cast<std::size_t>(2 * k)] + mags[static_cast<std::size_t>(2 * k + 1)]);
    }
    return out;
}

/// chi_BE = S(AB) - S(A|B_het), entanglement-based picture with the detector noise purified by
/// an extra EPR pair (trusted) and a beam splitter of transmission eta.
inline double holevo(double v_mod_d, double t_d, double eta_d, double xi_d, double v_en_d) {
    const Real v_mod = v_mod_d, t = t_d, eta = eta_d, xi = xi_d, v_en = v_en_d;
    const Real v = v_mod + 1.0L;
    const Real chi_line = 1.0L / t - 1.0L + xi;
    const Mat2 I = Mat2::Identity();
    const Mat2 Z = (Mat2() << 1.0L, 0.0L, 0.0L, -1.0L).finished();

    // Eve's information equals the entropy of the AB state after the channel.
    const Real b_ch = t * (v + chi_line);
    const Real c_ch = std::sqrt(t * (v * v - 1.0L));
    Mat ab(4, 4);
    ab << v * I, c_ch * Z, c_ch * Z, b_ch * I;
    const Vec nu_ab = symplectic_eigenvalues(ab);
    const Real s_ab = g_entropy(nu_ab(0)) + g_entropy(nu_ab(1));

    // Trusted detector: B passes a beam splitter (eta) mixing with mode F0 of an EPR pair (F0,G)
    // of variance w. The heterodyne split halves its contribution, so V_en = (1 - eta)(w - 1) / 2.
    const Real w = eta == 1.0L ? 1.0L : 1.0L + 2.0L * v_en / (1.0L - eta);
    Mat big = Mat::Zero(8, 8);  // order A, B, F0, G
    big.block(0, 0, 4, 4) = ab;
    const Real cw = std::sqrt(w * w - 1.0L);
    big.block(4, 4, 2, 2) = w * I;
    big.block(6, 6, 2, 2) = w * I;
    big.block(4, 6, 2, 2) = cw * Z;
    big.block(6, 4, 2, 2) = cw * Z;
    Mat bs = Mat::Identity(8, 8);
    const Real st = std::sqrt(eta);
    const Real sr = std::sqrt(1.0L - eta);
    bs.block(2, 2, 2, 2) = st * I;
    bs.block(2, 4, 2, 2) = sr * I;
    bs.block(4, 2, 2, 2) = -sr * I;
    bs.block(4, 4, 2, 2) = st * I;
    const Mat after = bs * big * bs.transpose();  // A, B', F, G

    // Heterodyne on B': conditional state of (A, F, G).
    const std::vector<int> keep = {0, 1, 4, 5, 6, 7};
    Mat ga(6, 6), cab(6, 2);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
            ga(i, j) = after(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);
        }
        for (int j = 0; j < 2; ++j) {
            cab(i, j) = after(keep[static_cast<std::size_t>(i)], 2 + j);
        }
    }
    const Mat2 gb = after.block(2, 2, 2, 2);
    const Mat cond = ga - cab * Mat((gb + I).inverse()) * cab.transpose();
    const Vec nu_c = symplectic_eigenvalues(cond);
    Real s_cond = 0.0L;
    for (long k = 0; k < nu_c.size(); ++k) {
        s_cond += g_entropy(nu_c(k));
    }
    return static_cast<double>(s_ab - s_cond);
}

}  // namespace oracle
