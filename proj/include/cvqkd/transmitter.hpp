#pragma once

// Transmitter: Gaussian symbols, TX DSP, DAC, IQ modulator, VOA and power meter.

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <random>
#include <vector>

#include "cvqkd/errors.hpp"
#include "cvqkd/random.hpp"
#include "cvqkd/units.hpp"
#include "cvqkd/wavecore.hpp"

namespace cvqkd {

// ---------------------------------------------------------------------------
// Symbols

inline SymbolBlock generate_gaussian_symbols(std::size_t n_sym, double variance, Seed seed,
                                             double symbol_rate = 1.0) {
    detail::require(n_sym >= 1, "n_sym must be >= 1");
    detail::require(variance > 0.0, "symbol variance must be > 0");
    detail::require(symbol_rate > 0.0, "symbol_rate must be > 0");
    Rng rng = make_rng(seed);
    std::normal_distribution<double> nd(0.0, std::sqrt(variance / 2.0));
    SymbolBlock b;
    b.symbol_rate = symbol_rate;
    b.x.resize(n_sym);
    b.p.resize(n_sym);
    for (std::size_t k = 0; k < n_sym; ++k) {
        b.x[k] = nd(rng);
        b.p[k] = nd(rng);
    }
    return b;
}

// ---------------------------------------------------------------------------
// Modulator

inline double extinction_gamma(double extinction_ratio_db) {
    const double s = std::sqrt(db_to_linear(extinction_ratio_db));
    return (s - 1.0) / (s + 1.0);
}

struct IqModulatorSpec {
    double v_pi = 1.0;                 // V
    double extinction_ratio_db = 35.0;  // dB
    double bias = 1.0;                 // V
    double iq_imbalance_db = 0.0;      // Q/I power ratio, dB

    double gamma() const { return extinction_gamma(extinction_ratio_db); }
    /// Field gain applied to the Q arm.
    double q_gain() const { return std::pow(10.0, iq_imbalance_db / 20.0); }

    void validate() const {
        detail::require(v_pi > 0.0, "v_pi must be > 0");
        detail::require(extinction_ratio_db > 0.0, "extinction ratio must be > 0 dB");
    }
};

struct LaserSpec {
    double power_w = 1e-3;
    double wavelength_m = 1550e-9;
};

/// Field transfer of one push-pull MZM arm, 0.5 (e^{j theta} + gamma e^{-j theta}).
inline cplx arm_field(double v_rf, double bias, double v_pi, double gamma) {
    const double theta = kPi * (v_rf - bias) / (2.0 * v_pi);
    return 0.5 * (std::polar(1.0, theta) + gamma * std::polar(1.0, -theta));
}

/// E_out / E_in for one pair of drive voltages.
inline cplx modulator_response(double v1, double v2, const IqModulatorSpec& spec) {
    const double g = spec.gamma();
    return arm_field(v1, spec.bias, spec.v_pi, g) +
           cplx(0.0, spec.q_gain()) * arm_field(v2, spec.bias, spec.v_pi, g);
}

/// d(arm_field)/dV at zero drive.
inline cplx arm_slope(double bias, double v_pi, double gamma) {
    const double k = kPi / (2.0 * v_pi);
    const double theta = -k * bias;
    return 0.5 * k * cplx(0.0, 1.0) * (std::polar(1.0, theta) - gamma * std::polar(1.0, -theta));
}

inline ComplexWaveform iq_modulate(const RealWaveform& v_rf1, const RealWaveform& v_rf2,
                                   const IqModulatorSpec& spec, const LaserSpec& laser) {
    v_rf1.validate();
    detail::require_compatible(v_rf1, v_rf2);
    spec.validate();
    detail::require(laser.power_w > 0.0, "laser power must be > 0");
    const double e_in = std::sqrt(laser.power_w);
    ComplexWaveform out(v_rf1.size(), v_rf1.sample_rate);
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = e_in * modulator_response(v_rf1[k], v_rf2[k], spec);
    }
    return out;
}

struct SmallSignalReport {
    std::vector<double> bias;      // V
    std::vector<double> measured;  // per-quadrature power, zero drive
    std::vector<double> expected;  // cos^2(0.5 pi V_bias / V_pi)
    double max_abs_error = 0.0;
    bool pass = false;
};

/// Sweeps V_bias over [0, 2 V_pi] at zero drive against the cos^2 law (absolute tolerance 0.01).
inline SmallSignalReport small_signal_check(const IqModulatorSpec& spec, std::size_t n_points = 201) {
    spec.validate();
    if (spec.extinction_ratio_db < 30.0) {
        throw ParameterError("small-signal check needs an extinction ratio >= 30 dB");
    }
    detail::require(n_points >= 2, "small-signal check needs >= 2 points");
    SmallSignalReport r;
    const double g = spec.gamma();
    for (std::size_t i = 0; i < n_points; ++i) {
        const double vb = 2.0 * spec.v_pi * static_cast<double>(i) / static_cast<double>(n_points - 1);
        const double meas = std::norm(arm_field(0.0, vb, spec.v_pi, g));
        const double c = std::cos(0.5 * kPi * vb / spec.v_pi);
        r.bias.push_back(vb);
        r.measured.push_back(meas);
        r.expected.push_back(c * c);
        r.max_abs_error = std::max(r.max_abs_error, std::abs(meas - c * c));
    }
    r.pass = r.max_abs_error <= 0.01;
    return r;
}

// ---------------------------------------------------------------------------
// Pilot configuration and TX DSP

enum class PilotKind { electrical, optical };

struct PilotMode {
    PilotKind kind = PilotKind::electrical;
    double f_pilot = 100e6;  // Hz, electrical pilot only
    double f_uc = 500e6;     // Hz

    double bias_voltage(double v_pi) const {
        return kind == PilotKind::electrical ? v_pi : 0.5 * v_pi;
    }

    void validate(double roll_off, double symbol_rate, double sample_rate) const {
        const double half_band = (1.0 + roll_off) * symbol_rate / 2.0;
        if (std::abs(f_uc) + half_band >= sample_rate / 2.0) {
            throw ConfigError("quantum band exceeds Nyquist");
        }
        if (kind == PilotKind::electrical) {
            if (std::abs(f_pilot) >= sample_rate / 2.0) {
                throw ConfigError("pilot frequency exceeds Nyquist");
            }
            if (!(std::abs(f_pilot - f_uc) > half_band)) {
                throw ConfigError("pilot and quantum bands overlap");
            }
        } else if (!(std::abs(f_uc) > half_band)) {
            throw ConfigError("quantum band overlaps the optical carrier");
        }
    }
};

struct DriveSignals {
    RealWaveform v_rf1;
    RealWaveform v_rf2;
    double sigma_s = 0.0;  // RMS of the shaped quantum signal per sample (complex)
};

/// Shaped, upconverted symbols plus the electrical pilot, in drive units.
/// sigma_s is taken from nominal_variance (total X+P variance per symbol), not the realization,
/// so that a zero-modulation block still carries a pilot of the configured level.
inline DriveSignals tx_dsp(const SymbolBlock& symbols, const PilotMode& pilot, const RrcFilter& rrc,
                           double sample_rate, double rho_db, double nominal_variance) {
    symbols.validate();
    const int sps = integer_ratio(sample_rate, symbols.symbol_rate);
    if (sps != rrc.samples_per_symbol()) {
        throw ParameterError("RRC samples per symbol does not match F_s / R_s");
    }
    pilot.validate(rrc.roll_off(), symbols.symbol_rate, sample_rate);
    detail::require(nominal_variance >= 0.0, "nominal variance must be >= 0");

    ComplexWaveform s = frequency_shift(pulse_shape(symbols, rrc), pilot.f_uc);
    DriveSignals d;
    d.sigma_s = std::sqrt(nominal_variance / sps);
    if (pilot.kind == PilotKind::electrical) {
        const double amp = std::sqrt(db_to_linear(rho_db)) * d.sigma_s;
        const double step = kTwoPi * pilot.f_pilot / sample_rate;
        for (std::size_t k = 0; k < s.size(); ++k) {
            s[k] += amp * std::polar(1.0, step * static_cast<double>(k));
        }
    }
    d.v_rf1 = RealWaveform(s.size(), sample_rate);
    d.v_rf2 = RealWaveform(s.size(), sample_rate);
    for (std::size_t k = 0; k < s.size(); ++k) {
        d.v_rf1[k] = s[k].real();
        d.v_rf2[k] = s[k].imag();
    }
    return d;
}

// ---------------------------------------------------------------------------
// VOA, power meter and V_mod calibration

struct VoaOutput {
    ComplexWaveform field;
    double p_pom = 0.0;  // W
};

/// Scales the field so that its mean power equals <n> (1 + rho) E_ph R_s and meters it.
inline VoaOutput apply_voa_and_meter(const ComplexWaveform& field, double target_mean_photons,
                                     double rho_linear, double symbol_rate, double wavelength_m) {
    field.validate();
    detail::require(target_mean_photons > 0.0, "target mean photon number must be > 0");
    detail::require(rho_linear >= 0.0, "rho must be >= 0");
    detail::require(symbol_rate > 0.0 && wavelength_m > 0.0, "symbol rate and wavelength must be > 0");
    const double p_in = mean_power(field);
    if (!(p_in > 0.0)) {
        throw DegenerateInputError("VOA input field has zero power");
    }
    const double target = target_mean_photons * (1.0 + rho_linear) * photon_energy(wavelength_m) * symbol_rate;
    VoaOutput out;
    out.field = std::sqrt(target / p_in) * field;
    out.p_pom = mean_power(out.field);
    return out;
}

inline double calibrate_vmod(double p_pom, double rho_linear, double e_ph, double symbol_rate) {
    detail::require(p_pom > 0.0 && e_ph > 0.0 && symbol_rate > 0.0, "V_mod calibration inputs must be > 0");
    detail::require(rho_linear >= 0.0, "rho must be >= 0");
    return 2.0 * p_pom / ((1.0 + rho_linear) * e_ph * symbol_rate);
}

/// Pilot-to-quantum power ratio read from the PSD: pilot line (+-pilot_halfwidth)
/// over the quantum band (f_quantum +- quantum_halfwidth). Infinite if the band is empty.
inline double measure_pilot_ratio(const ComplexWaveform& field, double f_pilot, double f_quantum,
                                  double quantum_halfwidth, double pilot_halfwidth = 1e6,
                                  std::size_t segment_len = 32768) {
    const std::size_t seg = std::min(segment_len, std::size_t{1} << static_cast<int>(std::log2(field.size())));
    const Spectrum sp = estimate_psd(field, seg);
    const double p_pilot = sp.band_power(f_pilot - pilot_halfwidth, f_pilot + pilot_halfwidth);
    const double p_q = sp.band_power(f_quantum - quantum_halfwidth, f_quantum + quantum_halfwidth);
    if (!(p_q > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    return p_pilot / p_q;
}

// ---------------------------------------------------------------------------
// Complete transmitter

struct TransmitterConfig {
    double sample_rate = 2e9;
    double symbol_rate = 100e6;
    PilotMode pilot;
    double rho_db = 34.0;
    int n_dac = 12;                  // 0 disables DAC quantization
    double dac_loading = 4.0;        // DAC full scale in units of the composite per-quadrature RMS
    double ep_full_scale_vpi = 0.5;  // EP: DAC full scale mapped to this fraction of V_pi
    IqModulatorSpec modulator;       // bias is overwritten from the pilot mode
    LaserSpec laser;
    double target_vmod = 2.5;        // SNU, sets <n> = V_mod / 2 at the VOA
    double symbol_variance = 2.0;    // nominal X+P variance of the generated symbols
    double pilot_meter_halfwidth = 1e6;
    std::size_t psd_segment = 32768;
};

struct TransmitterOutput {
    ComplexWaveform field;       // optical field after the VOA, sqrt(W)
    double p_pom = 0.0;          // W
    double rho_measured = 0.0;   // linear
    double v_mod = 0.0;          // SNU, from P_POM and rho_measured
    double volts_per_unit = 0.0; // drive-unit to volt scale
    double dac_full_scale = 0.0; // V
};

/// Composite per-quadrature RMS of the drive (drive units), from nominal statistics.
inline double composite_rms(const TransmitterConfig& cfg, double sigma_s) {
    double p = sigma_s * sigma_s;
    if (cfg.pilot.kind == PilotKind::electrical) {
        p *= 1.0 + db_to_linear(cfg.rho_db);
    }
    return std::sqrt(p / 2.0);
}

/// Drive-unit to volt scale. EP: DAC full scale at ep_full_scale_vpi * V_pi.
/// OP: quantum amplitude set so that carrier power / quantum power = rho in the small-signal limit.
inline double drive_scale(const TransmitterConfig& cfg, const IqModulatorSpec& mod, double sigma_s) {
    const double fs_units = cfg.dac_loading * composite_rms(cfg, sigma_s);
    if (cfg.pilot.kind == PilotKind::electrical) {
        return cfg.ep_full_scale_vpi * mod.v_pi / fs_units;
    }
    const double g = mod.gamma();
    const cplx carrier = modulator_response(0.0, 0.0, mod);
    const double slope = std::abs(arm_slope(mod.bias, mod.v_pi, g));
    const double rho = db_to_linear(cfg.rho_db);
    return std::abs(carrier) / (slope * std::sqrt(rho) * sigma_s);
}

inline TransmitterOutput transmit(const TransmitterConfig& cfg, const SymbolBlock& symbols,
                                  const RrcFilter& rrc) {
    IqModulatorSpec mod = cfg.modulator;
    mod.bias = cfg.pilot.bias_voltage(mod.v_pi);
    mod.validate();
    if (cfg.n_dac < 0) {
        throw ConfigError("n_dac must be >= 0");
    }
    detail::require(cfg.dac_loading > 0.0, "DAC loading must be > 0");

    DriveSignals d = tx_dsp(symbols, cfg.pilot, rrc, cfg.sample_rate, cfg.rho_db, cfg.symbol_variance);
    TransmitterOutput out;
    out.volts_per_unit = drive_scale(cfg, mod, d.sigma_s);
    out.dac_full_scale = out.volts_per_unit * cfg.dac_loading * composite_rms(cfg, d.sigma_s);

    ComplexWaveform v(d.v_rf1.size(), cfg.sample_rate);
    for (std::size_t k = 0; k < v.size(); ++k) {
        v[k] = out.volts_per_unit * cplx(d.v_rf1[k], d.v_rf2[k]);
    }
    if (cfg.n_dac > 0) {
        v = quantize_uniform(v, cfg.n_dac, out.dac_full_scale);
    }
    for (std::size_t k = 0; k < v.size(); ++k) {
        d.v_rf1[k] = v[k].real();
        d.v_rf2[k] = v[k].imag();
    }

    const ComplexWaveform field = iq_modulate(d.v_rf1, d.v_rf2, mod, cfg.laser);
    const double f_pilot = cfg.pilot.kind == PilotKind::electrical ? cfg.pilot.f_pilot : 0.0;
    const double half_band = (1.0 + rrc.roll_off()) * cfg.symbol_rate / 2.0;
    out.rho_measured = measure_pilot_ratio(field, f_pilot, cfg.pilot.f_uc, half_band,
                                           cfg.pilot_meter_halfwidth, cfg.psd_segment);

    const double rho_cfg = db_to_linear(cfg.rho_db);
    VoaOutput voa = apply_voa_and_meter(field, cfg.target_vmod / 2.0, rho_cfg, cfg.symbol_rate,
                                        cfg.laser.wavelength_m);
    out.field = std::move(voa.field);
    out.p_pom = voa.p_pom;
    out.v_mod = std::isfinite(out.rho_measured)
                    ? calibrate_vmod(out.p_pom, out.rho_measured, photon_energy(cfg.laser.wavelength_m),
                                     cfg.symbol_rate)
                    : 0.0;
    return out;
}

}  // namespace cvqkd
