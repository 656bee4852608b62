#pragma once

// Dual-drive IQ modulator field transfer written out term by term.

#include <cmath>
#include <complex>

namespace oracle {

inline std::complex<double> iq_field(double v1, double v2, double v_bias, double v_pi, double delta_db) {
    const double delta = std::pow(10.0, delta_db / 10.0);
    const double gamma = (std::sqrt(delta) - 1.0) / (std::sqrt(delta) + 1.0);
    const double t1 = M_PI * (v1 - v_bias) / (2.0 * v_pi);
    const double t2 = M_PI * (v2 - v_bias) / (2.0 * v_pi);
    // real and imaginary parts expanded by hand
    const double i_re = std::cos(t1) + gamma * std::cos(t1);
    const double i_im = std::sin(t1) - gamma * std::sin(t1);
    const double q_re = std::cos(t2) + gamma * std::cos(t2);
    const double q_im = std::sin(t2) - gamma * std::sin(t2);
    // j * (q_re + j q_im) = -q_im + j q_re
    return {0.5 * (i_re - q_im), 0.5 * (i_im + q_re)};
}

}  // namespace oracle
