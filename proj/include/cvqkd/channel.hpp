#pragma once

// Fiber loss, lumped TX+LO laser phase noise and TX-LO frequency offset.

#include <cmath>
#include <complex>
#include <cstddef>
#include <random>

#include "cvqkd/errors.hpp"
#include "cvqkd/random.hpp"
#include "cvqkd/wavecore.hpp"

namespace cvqkd {

struct ChannelSpec {
    double distance_km = 0.0;
    double loss_db_per_km = 0.16;
    double linewidth_total_hz = 0.0;  // TX + LO
    double freq_offset_hz = 0.0;

    void validate() const {
        detail::require(distance_km >= 0.0, "distance must be >= 0");
        detail::require(loss_db_per_km >= 0.0, "fiber loss must be >= 0");
        detail::require(linewidth_total_hz >= 0.0, "linewidth must be >= 0");
    }
};

inline double fiber_transmittance(const ChannelSpec& spec) {
    spec.validate();
    return std::pow(10.0, -spec.loss_db_per_km * spec.distance_km / 10.0);
}

/// Wiener phase: phi[0] = 0, increments N(0, 2 pi linewidth / F_s).
inline RealWaveform phase_noise_trace(double linewidth_hz, std::size_t n_samples, double sample_rate,
                                      Seed seed) {
    detail::require(linewidth_hz >= 0.0, "linewidth must be >= 0");
    detail::require(n_samples >= 1, "phase trace needs >= 1 sample");
    detail::require(sample_rate > 0.0, "sample rate must be > 0");
    RealWaveform phi(n_samples, sample_rate);
    if (linewidth_hz == 0.0) {
        return phi;
    }
    Rng rng = make_rng(seed);
    std::normal_distribution<double> nd(0.0, std::sqrt(kTwoPi * linewidth_hz / sample_rate));
    for (std::size_t k = 1; k < n_samples; ++k) {
        phi[k] = phi[k - 1] + nd(rng);
    }
    return phi;
}

inline ComplexWaveform apply_channel(const ComplexWaveform& field, const ChannelSpec& spec,
                                     const RealWaveform& phase) {
    field.validate();
    if (phase.size() != field.size()) {
        throw ParameterError("phase trace length differs from field length");
    }
    const double amp = std::sqrt(fiber_transmittance(spec));
    const double step = kTwoPi * spec.freq_offset_hz / field.sample_rate;
    ComplexWaveform out(field.size(), field.sample_rate);
    for (std::size_t k = 0; k < field.size(); ++k) {
        out[k] = field[k] * std::polar(amp, step * static_cast<double>(k) + phase[k]);
    }
    return out;
}

}  // namespace cvqkd
