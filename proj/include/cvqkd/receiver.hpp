#pragma once

// RF heterodyne front end: single balanced detector, shot and electronic noise,
// TIA, single-pole detector bandwidth and ADC.

#include <cmath>
#include <complex>
#include <cstddef>
#include <random>

#include "cvqkd/errors.hpp"
#include "cvqkd/random.hpp"
#include "cvqkd/units.hpp"
#include "cvqkd/wavecore.hpp"

namespace cvqkd {

struct DetectorSpec {
    double responsivity = 1.0;     // A/W
    double nep = 7e-12;            // W/sqrt(Hz)
    double tia_gain = 3500.0;      // V/A
    double bandwidth_hz = 800e6;
    int adc_bits = 12;
    double adc_full_scale = 1.0;   // V
    double lo_power_w = 1.5e-3;
    double efficiency_eta = 0.7;   // total detection efficiency
    double wavelength_m = 1550e-9;

    /// Quantum efficiency implied by the responsivity, R E_ph / q.
    double quantum_efficiency() const {
        return responsivity * photon_energy(wavelength_m) / kElementaryCharge;
    }

    /// Field power transmission applied before the photodiode so that the total
    /// efficiency (optical loss times quantum efficiency) equals efficiency_eta.
    double optical_efficiency() const { return efficiency_eta / quantum_efficiency(); }

    void validate() const {
        detail::require(responsivity > 0.0, "responsivity must be > 0");
        detail::require(nep >= 0.0, "NEP must be >= 0");
        detail::require(tia_gain > 0.0, "TIA gain must be > 0");
        detail::require(bandwidth_hz > 0.0, "detector bandwidth must be > 0");
        detail::require(adc_bits >= 1, "ADC resolution must be >= 1 bit");
        detail::require(adc_full_scale > 0.0, "ADC full scale must be > 0");
        detail::require(lo_power_w > 0.0, "LO power must be > 0");
        detail::require(efficiency_eta > 0.0 && efficiency_eta <= 1.0, "efficiency must lie in (0, 1]");
        detail::require(wavelength_m > 0.0, "wavelength must be > 0");
        if (optical_efficiency() > 1.0) {
            throw ConfigError("detection efficiency exceeds the photodiode quantum efficiency");
        }
    }

    /// Shot-noise current variance per sample, q R P_LO F_s.
    double shot_variance(double sample_rate) const {
        return kElementaryCharge * responsivity * lo_power_w * sample_rate;
    }

    /// Electronic-noise current variance per sample, (NEP R)^2 F_s / 2.
    double electronic_variance(double sample_rate) const {
        const double a = nep * responsivity;
        return a * a * sample_rate / 2.0;
    }
};

/// Switch states for the two calibration paths and for noiseless checks.
struct DetectOptions {
    bool lo_on = true;
    bool signal_on = true;
    bool shot_noise = true;
    bool electronic_noise = true;
    bool bandwidth_filter = true;
    bool adc = true;
};

/// Single-pole low-pass, bilinear transform with the corner prewarped.
struct SinglePoleLowpass {
    double b0 = 1.0;
    double a1 = 0.0;

    SinglePoleLowpass(double corner_hz, double sample_rate) {
        detail::require(corner_hz > 0.0 && corner_hz < sample_rate / 2.0,
                        "detector bandwidth must lie below Nyquist");
        const double k = std::tan(kPi * corner_hz / sample_rate);
        b0 = k / (1.0 + k);
        a1 = (k - 1.0) / (k + 1.0);
    }

    /// Complex frequency response at f (Hz).
    cplx response(double f, double sample_rate) const {
        const cplx z1 = std::polar(1.0, -kTwoPi * f / sample_rate);
        return b0 * (1.0 + z1) / (1.0 + a1 * z1);
    }

    void apply(RealWaveform& w) const {
        double x_prev = 0.0;
        double y_prev = 0.0;
        for (double& v : w.samples) {
            const double y = b0 * (v + x_prev) - a1 * y_prev;
            x_prev = v;
            y_prev = y;
            v = y;
        }
    }
};

inline RealWaveform adc_digitize(const RealWaveform& v, const DetectorSpec& spec) {
    return quantize_uniform(v, spec.adc_bits, spec.adc_full_scale);
}

/// Photocurrent i = 2 R sqrt(P_LO) Re{sqrt(eta_opt) s} plus noises, then TIA, bandwidth, ADC.
inline RealWaveform heterodyne_detect(const ComplexWaveform& signal, const DetectorSpec& spec, Seed seed,
                                      const DetectOptions& opt = {}) {
    signal.validate();
    spec.validate();
    const double fs = signal.sample_rate;
    RealWaveform out(signal.size(), fs);

    if (opt.lo_on && opt.signal_on) {
        const double gain = 2.0 * spec.responsivity * std::sqrt(spec.lo_power_w * spec.optical_efficiency());
        for (std::size_t k = 0; k < signal.size(); ++k) {
            out[k] = gain * signal[k].real();
        }
    }

    double noise_var = 0.0;
    if (opt.lo_on && opt.shot_noise) {
        noise_var += spec.shot_variance(fs);
    }
    if (opt.electronic_noise) {
        noise_var += spec.electronic_variance(fs);
    }
    if (noise_var > 0.0) {
        Rng rng = make_rng(seed);
        std::normal_distribution<double> nd(0.0, std::sqrt(noise_var));
        for (double& v : out.samples) {
            v += nd(rng);
        }
    }

    for (double& v : out.samples) {
        v *= spec.tia_gain;
    }
    if (opt.bandwidth_filter) {
        SinglePoleLowpass(spec.bandwidth_hz, fs).apply(out);
    }
    if (opt.adc) {
        out = adc_digitize(out, spec);
    }
    return out;
}

struct CalibrationRecord {
    double v_electronic = 0.0;            // raw ADC variance, LO off
    double v_shot_plus_electronic = 0.0;  // raw ADC variance, LO on
    double v_shot = 0.0;
    double snu_scale = 0.0;               // 1 / v_shot

    double v_en() const { return v_electronic / v_shot; }
};

inline CalibrationRecord make_calibration(double v_electronic, double v_shot_plus_electronic) {
    CalibrationRecord c;
    c.v_electronic = v_electronic;
    c.v_shot_plus_electronic = v_shot_plus_electronic;
    c.v_shot = v_shot_plus_electronic - v_electronic;
    if (!(c.v_shot > 0.0)) {
        throw CalibrationError("shot-noise variance is not positive; LO power too low");
    }
    c.snu_scale = 1.0 / c.v_shot;
    return c;
}

inline double sample_variance(const RealWaveform& w) {
    double mean = 0.0;
    for (double v : w.samples) {
        mean += v;
    }
    mean /= static_cast<double>(w.size());
    double acc = 0.0;
    for (double v : w.samples) {
        acc += (v - mean) * (v - mean);
    }
    return acc / static_cast<double>(w.size());
}

/// The two optical-switch captures: (LO off, signal off) and (LO on, signal off).
/// reduce maps a capture to a variance; the default is the raw sample variance.
template <typename Reducer>
CalibrationRecord run_calibration(const DetectorSpec& spec, std::size_t n_samples, double sample_rate,
                                  Seed seed_electronic, Seed seed_shot, Reducer&& reduce) {
    detail::require(n_samples >= 2, "calibration needs >= 2 samples");
    const ComplexWaveform dark(n_samples, sample_rate);
    DetectOptions off;
    off.signal_on = false;
    off.lo_on = false;
    DetectOptions on = off;
    on.lo_on = true;
    const double v_el = reduce(heterodyne_detect(dark, spec, seed_electronic, off));
    const double v_tot = reduce(heterodyne_detect(dark, spec, seed_shot, on));
    return make_calibration(v_el, v_tot);
}

inline CalibrationRecord run_calibration(const DetectorSpec& spec, std::size_t n_samples, double sample_rate,
                                         Seed seed_electronic, Seed seed_shot) {
    return run_calibration(spec, n_samples, sample_rate, seed_electronic, seed_shot,
                           [](const RealWaveform& w) { return sample_variance(w); });
}

}  // namespace cvqkd
