#pragma once

// Receiver DSP: pilot search, pilot-phase estimation with moving-average smoothing,
// downconversion, matched RRC filtering, timing/frame alignment and decimation.
//
// All filtering runs on one zero-padded FFT grid of the received block. Zero-phase
// filters are applied as real frequency responses, so no group delay has to be tracked.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include "cvqkd/errors.hpp"
#include "cvqkd/fft.hpp"
#include "cvqkd/receiver.hpp"
#include "cvqkd/units.hpp"
#include "cvqkd/wavecore.hpp"

namespace cvqkd {

struct PhaseEstimate {
    std::vector<double> phase_trace;  // rad per sample, relative to reference_freq
    double freq_offset_est = 0.0;     // Hz, least-squares slope of phase_trace
    double pilot_snr_db = 0.0;
    double reference_freq = 0.0;      // Hz, frequency removed before taking the angle
};

// ---------------------------------------------------------------------------
// Helpers on an N-point grid

namespace detail {

/// DFT of a symmetric FIR placed with its center tap at index 0 (zero phase). Real by symmetry.
inline std::vector<double> zero_phase_response(const std::vector<double>& taps, std::size_t n_fft) {
    std::vector<cplx> buf(n_fft, cplx{0.0, 0.0});
    const auto c = static_cast<std::ptrdiff_t>(taps.size() / 2);
    const auto N = static_cast<std::ptrdiff_t>(n_fft);
    for (std::size_t j = 0; j < taps.size(); ++j) {
        const std::ptrdiff_t idx = ((static_cast<std::ptrdiff_t>(j) - c) % N + N) % N;
        buf[static_cast<std::size_t>(idx)] += taps[j];
    }
    fft::forward(buf);
    std::vector<double> out(n_fft);
    for (std::size_t m = 0; m < n_fft; ++m) {
        out[m] = buf[m].real();
    }
    return out;
}

/// Hamming-windowed sinc low-pass, unit DC gain.
inline std::vector<double> lowpass_taps(double cutoff_hz, double sample_rate, std::size_t length) {
    require(length % 2 == 1, "low-pass length must be odd");
    require(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0, "low-pass cutoff must lie below Nyquist");
    std::vector<double> h(length);
    const double fc = cutoff_hz / sample_rate;
    const auto c = static_cast<double>(length / 2);
    double sum = 0.0;
    for (std::size_t j = 0; j < length; ++j) {
        const double t = static_cast<double>(j) - c;
        const double sinc = t == 0.0 ? 2.0 * fc : std::sin(kTwoPi * fc * t) / (kPi * t);
        const double w = 0.54 - 0.46 * std::cos(kTwoPi * static_cast<double>(j) / static_cast<double>(length - 1));
        h[j] = sinc * w;
        sum += h[j];
    }
    for (double& v : h) {
        v /= sum;
    }
    return h;
}

inline std::size_t wrap_bin(long long b, std::size_t n) {
    const auto N = static_cast<long long>(n);
    return static_cast<std::size_t>(((b % N) + N) % N);
}

/// Least-squares slope of y against its index.
inline double ls_slope(const std::vector<double>& y) {
    const auto n = static_cast<double>(y.size());
    if (y.size() < 2) {
        return 0.0;
    }
    const double kbar = (n - 1.0) / 2.0;
    double ybar = 0.0;
    for (double v : y) {
        ybar += v;
    }
    ybar /= n;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        const double dk = static_cast<double>(k) - kbar;
        num += dk * (y[k] - ybar);
        den += dk * dk;
    }
    return num / den;
}

/// Vertex offset (bins, in [-0.5, 0.5]) of a parabola through three log-power samples.
inline double parabolic_offset(double a, double b, double c) {
    const double den = a - 2.0 * b + c;
    if (den >= 0.0) {
        return 0.0;
    }
    return std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pilot search

/// Strongest tone in [f_lo, f_hi]. Detection runs on an averaged periodogram (the peak must stand
/// >= 10 dB above the in-band median); the frequency is then refined on a Hann-windowed FFT of the
/// whole capture with quadratic interpolation of the log power.
inline double locate_pilot(const RealWaveform& rx, double f_lo, double f_hi,
                           std::size_t detect_segment = 4096) {
    rx.validate();
    const double fs = rx.sample_rate;
    detail::require(f_lo < f_hi, "pilot search band is empty");
    detail::require(f_lo >= 0.0 && f_hi <= fs / 2.0, "pilot search band must lie in [0, F_s/2]");

    const std::size_t seg = std::min(detect_segment, std::size_t{1} << static_cast<int>(std::log2(rx.size())));
    const Spectrum coarse = estimate_psd(rx, seg);
    std::vector<double> band;
    std::size_t best = 0;
    double best_p = -1.0;
    for (std::size_t m = 0; m < coarse.frequency.size(); ++m) {
        if (coarse.frequency[m] >= f_lo && coarse.frequency[m] <= f_hi) {
            band.push_back(coarse.density[m]);
            if (coarse.density[m] > best_p) {
                best_p = coarse.density[m];
                best = m;
            }
        }
    }
    if (band.size() < 3) {
        throw PilotNotFoundError("pilot search band narrower than the detection resolution");
    }
    std::nth_element(band.begin(), band.begin() + static_cast<std::ptrdiff_t>(band.size() / 2), band.end());
    const double median = band[band.size() / 2];
    if (!(best_p >= 10.0 * median) || !(best_p > 0.0)) {
        throw PilotNotFoundError("no pilot tone 10 dB above the in-band noise");
    }
    const double f_coarse = coarse.frequency[best];

    const std::size_t n_fft = fft::next_pow2(rx.size());
    const auto win = hann_window(rx.size());
    std::vector<cplx> buf(n_fft, cplx{0.0, 0.0});
    for (std::size_t k = 0; k < rx.size(); ++k) {
        buf[k] = rx[k] * win[k];
    }
    fft::forward(buf);
    const double df = fs / static_cast<double>(n_fft);
    const double half_width = 2.0 * coarse.resolution;
    const auto m_lo = static_cast<std::size_t>(std::max(1.0, std::ceil(std::max(f_lo, f_coarse - half_width) / df)));
    const auto m_hi = static_cast<std::size_t>(
        std::min(static_cast<double>(n_fft / 2 - 2), std::floor(std::min(f_hi, f_coarse + half_width) / df)));
    std::size_t peak = m_lo;
    for (std::size_t m = m_lo; m <= m_hi; ++m) {
        if (std::norm(buf[m]) > std::norm(buf[peak])) {
            peak = m;
        }
    }
    const auto lp = [&](std::size_t m) { return std::log(std::norm(buf[m]) + 1e-300); };
    const double delta = detail::parabolic_offset(lp(peak - 1), lp(peak), lp(peak + 1));
    return (static_cast<double>(peak) + delta) * df;
}

// ---------------------------------------------------------------------------
// Demodulator on a fixed FFT grid

struct RxDspConfig {
    double sample_rate = 2e9;
    double symbol_rate = 100e6;
    double pilot_bw = 30e6;              // double-sided pilot isolation bandwidth
    std::size_t maf_m = 0;               // moving-average length, 0 = off
    double min_pilot_snr_db = 6.0;       // noise alone reads about 3.7 dB on the envelope estimate
    std::optional<double> detector_bandwidth;  // equalize the single-pole response if set
    double max_equalizer_gain = 20.0;
    int timing_halfwidth = 0;            // search tau in [-w, w]; 0 selects sps / 2
};

/// Known symbols used for timing and the constant-phase reference.
struct FrameReference {
    std::size_t n_symbols = 0;           // frame length in symbols
    std::vector<std::size_t> positions;  // symbol indices within the frame
    std::vector<cplx> symbols;           // X + jP at those positions
};

struct DemodResult {
    SymbolBlock symbols;                 // every frame symbol, constant phase removed
    int tau = 0;                         // timing offset, samples
    cplx correlation{0.0, 0.0};
    double normalized_correlation = 0.0;
};

class Demodulator {
public:
    Demodulator(const RxDspConfig& cfg, const RrcFilter& rrc, std::size_t n_samples)
        : cfg_(cfg), rrc_(rrc), n_(n_samples) {
        detail::require(n_samples >= 2, "demodulator needs >= 2 samples");
        sps_ = integer_ratio(cfg.sample_rate, cfg.symbol_rate);
        if (sps_ != rrc.samples_per_symbol()) {
            throw ParameterError("RRC samples per symbol does not match F_s / R_s");
        }
        detail::require(cfg.pilot_bw > 0.0, "pilot bandwidth must be > 0");
        auto lpf_len = static_cast<std::size_t>(std::ceil(4.0 * cfg.sample_rate / cfg.pilot_bw));
        lpf_len |= 1U;
        n_fft_ = fft::next_pow2(n_samples + std::max(lpf_len, rrc.size()));
        df_ = cfg.sample_rate / static_cast<double>(n_fft_);
        rrc_response_ = detail::zero_phase_response(rrc.taps(), n_fft_);
        lpf_response_ = detail::zero_phase_response(
            detail::lowpass_taps(cfg.pilot_bw / 2.0, cfg.sample_rate, lpf_len), n_fft_);
        if (cfg.detector_bandwidth) {
            const SinglePoleLowpass pole(*cfg.detector_bandwidth, cfg.sample_rate);
            equalizer_.resize(n_fft_ / 2);
            for (std::size_t m = 0; m < n_fft_ / 2; ++m) {
                cplx h = pole.response(static_cast<double>(m) * df_, cfg.sample_rate);
                if (std::abs(h) * cfg.max_equalizer_gain < 1.0) {
                    h *= 1.0 / (std::abs(h) * cfg.max_equalizer_gain);
                }
                equalizer_[m] = 1.0 / h;
            }
        }
    }

    std::size_t n_samples() const { return n_; }
    std::size_t n_fft() const { return n_fft_; }
    int sps() const { return sps_; }
    double bin_spacing() const { return df_; }
    const RxDspConfig& config() const { return cfg_; }

    /// Equalized analytic-signal spectrum of the zero-padded capture.
    std::vector<cplx> analytic_spectrum(const RealWaveform& rx) const {
        if (rx.size() != n_) {
            throw ParameterError("capture length differs from the demodulator plan");
        }
        std::vector<cplx> z(n_fft_, cplx{0.0, 0.0});
        for (std::size_t k = 0; k < n_; ++k) {
            z[k] = rx[k];
        }
        fft::forward(z);
        const std::size_t half = n_fft_ / 2;
        for (std::size_t m = 1; m < half; ++m) {
            z[m] *= 2.0;
        }
        if (!equalizer_.empty()) {
            for (std::size_t m = 0; m < half; ++m) {
                z[m] *= equalizer_[m];
            }
        }
        for (std::size_t m = half; m < n_fft_; ++m) {
            z[m] = 0.0;
        }
        return z;
    }

    /// Bin nearest to f on the FFT grid and the frequency of that bin.
    std::pair<long long, double> nearest_bin(double f) const {
        const auto b = static_cast<long long>(std::llround(f / df_));
        return {b, static_cast<double>(b) * df_};
    }

    /// Pilot phase around pilot_freq: downconvert by the nearest bin, low-pass, moving average,
    /// unwrapped angle.
    PhaseEstimate estimate_phase(const std::vector<cplx>& z, double pilot_freq) const {
        const auto [b, f_ref] = nearest_bin(pilot_freq);
        std::vector<cplx> buf(n_fft_);
        for (std::size_t m = 0; m < n_fft_; ++m) {
            buf[m] = z[detail::wrap_bin(static_cast<long long>(m) + b, n_fft_)] * lpf_response_[m];
        }
        fft::inverse(buf);
        ComplexWaveform env(std::vector<cplx>(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n_)),
                            cfg_.sample_rate);
        env = moving_average(env, cfg_.maf_m);

        double mean_pow = 0.0;
        double mean_mag = 0.0;
        for (const auto& v : env.samples) {
            mean_pow += std::norm(v);
            mean_mag += std::abs(v);
        }
        mean_pow /= static_cast<double>(n_);
        mean_mag /= static_cast<double>(n_);
        const double var_mag = std::max(mean_pow - mean_mag * mean_mag, 1e-300 * mean_pow);
        PhaseEstimate est;
        est.reference_freq = f_ref;
        est.pilot_snr_db = linear_to_db(mean_pow / (2.0 * var_mag));
        if (!(est.pilot_snr_db >= cfg_.min_pilot_snr_db)) {
            throw SyncError("pilot SNR after filtering below threshold");
        }
        est.phase_trace.resize(n_);
        for (std::size_t k = 0; k < n_; ++k) {
            est.phase_trace[k] = std::arg(env[k]);
        }
        unwrap_in_place(est.phase_trace);
        est.freq_offset_est = detail::ls_slope(est.phase_trace) * cfg_.sample_rate / kTwoPi;
        return est;
    }

    /// Full-rate matched-filter output: z rotated by -(2 pi f_quantum k / F_s + trace[k]),
    /// then filtered with the RRC. An empty trace means no phase correction.
    ComplexWaveform matched_output(const std::vector<cplx>& z, double f_quantum,
                                   const std::vector<double>& trace) const {
        if (!trace.empty() && trace.size() != n_) {
            throw ParameterError("phase trace length differs from the capture");
        }
        const auto [b, f_bin] = nearest_bin(f_quantum);
        const double r = f_quantum - f_bin;
        std::vector<cplx> buf(n_fft_);
        for (std::size_t m = 0; m < n_fft_; ++m) {
            buf[m] = z[detail::wrap_bin(static_cast<long long>(m) + b, n_fft_)];
        }
        fft::inverse(buf);
        const double step = kTwoPi * r / cfg_.sample_rate;
        for (std::size_t k = 0; k < n_; ++k) {
            const double ph = step * static_cast<double>(k) + (trace.empty() ? 0.0 : trace[k]);
            buf[k] *= std::polar(1.0, -ph);
        }
        std::fill(buf.begin() + static_cast<std::ptrdiff_t>(n_), buf.end(), cplx{0.0, 0.0});
        fft::forward(buf);
        for (std::size_t m = 0; m < n_fft_; ++m) {
            buf[m] *= rrc_response_[m];
        }
        fft::inverse(buf);
        return ComplexWaveform(std::vector<cplx>(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n_)),
                               cfg_.sample_rate);
    }

    /// Noise-only path for calibration captures: band selection and RRC in one pass.
    /// Statistically equivalent to matched_output with no phase trace.
    ComplexWaveform matched_output_noise(const std::vector<cplx>& z, double f_quantum) const {
        const auto [b, f_bin] = nearest_bin(f_quantum);
        std::vector<cplx> buf(n_fft_);
        for (std::size_t m = 0; m < n_fft_; ++m) {
            buf[m] = z[detail::wrap_bin(static_cast<long long>(m) + b, n_fft_)] * rrc_response_[m];
        }
        fft::inverse(buf);
        return ComplexWaveform(std::vector<cplx>(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n_)),
                               cfg_.sample_rate);
    }

    /// Per-quadrature variance of the decimated symbols at tau = 0 over [first, first + count).
    double symbol_variance(const ComplexWaveform& w, std::size_t first, std::size_t count) const {
        double sx = 0.0;
        double sxx = 0.0;
        double sp = 0.0;
        double spp = 0.0;
        for (std::size_t m = first; m < first + count; ++m) {
            const cplx v = w[m * static_cast<std::size_t>(sps_)];
            sx += v.real();
            sxx += v.real() * v.real();
            sp += v.imag();
            spp += v.imag() * v.imag();
        }
        const auto n = static_cast<double>(count);
        const double vx = sxx / n - (sx / n) * (sx / n);
        const double vp = spp / n - (sp / n) * (sp / n);
        return 0.5 * (vx + vp);
    }

    /// Timing search over tau against the reference symbols, constant-phase removal and decimation.
    DemodResult align_and_decimate(const ComplexWaveform& w, const FrameReference& ref) const {
        detail::require(ref.positions.size() == ref.symbols.size() && !ref.positions.empty(),
                        "frame reference is empty or inconsistent");
        detail::require(ref.n_symbols * static_cast<std::size_t>(sps_) <= n_, "frame longer than capture");
        const int half = cfg_.timing_halfwidth > 0 ? cfg_.timing_halfwidth : sps_ / 2;
        double ref_energy = 0.0;
        for (const auto& s : ref.symbols) {
            ref_energy += std::norm(s);
        }
        const auto n = static_cast<std::ptrdiff_t>(n_);
        DemodResult best;
        double best_mag = -1.0;
        for (int tau = -half; tau <= half; ++tau) {
            cplx c{0.0, 0.0};
            double e = 0.0;
            for (std::size_t i = 0; i < ref.positions.size(); ++i) {
                const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(ref.positions[i]) * sps_ + tau;
                if (idx < 0 || idx >= n) {
                    continue;
                }
                const cplx v = w[static_cast<std::size_t>(idx)];
                c += v * std::conj(ref.symbols[i]);
                e += std::norm(v);
            }
            if (std::abs(c) > best_mag) {
                best_mag = std::abs(c);
                best.tau = tau;
                best.correlation = c;
                best.normalized_correlation = e > 0.0 ? std::abs(c) / std::sqrt(e * ref_energy) : 0.0;
            }
        }
        const double threshold = 4.0 / std::sqrt(static_cast<double>(ref.positions.size()));
        if (!(best.normalized_correlation >= threshold)) {
            throw FrameSyncError("timing correlation peak below threshold");
        }
        const cplx derot = std::polar(1.0, -std::arg(best.correlation));
        best.symbols.symbol_rate = cfg_.symbol_rate;
        best.symbols.x.resize(ref.n_symbols);
        best.symbols.p.resize(ref.n_symbols);
        for (std::size_t m = 0; m < ref.n_symbols; ++m) {
            const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(m) * sps_ + best.tau;
            const cplx v = (idx >= 0 && idx < n) ? w[static_cast<std::size_t>(idx)] * derot : cplx{0.0, 0.0};
            best.symbols.x[m] = v.real();
            best.symbols.p[m] = v.imag();
        }
        return best;
    }

private:
    RxDspConfig cfg_;
    RrcFilter rrc_;
    std::size_t n_;
    int sps_ = 0;
    std::size_t n_fft_ = 0;
    double df_ = 0.0;
    std::vector<double> rrc_response_;
    std::vector<double> lpf_response_;
    std::vector<cplx> equalizer_;
};

// ---------------------------------------------------------------------------
// Stand-alone stage functions

inline PhaseEstimate estimate_phase(const RealWaveform& rx, double pilot_freq, double pilot_bw, std::size_t M,
                                    double symbol_rate = 100e6, int sps = 20) {
    rx.validate();
    RxDspConfig cfg;
    cfg.sample_rate = rx.sample_rate;
    cfg.symbol_rate = symbol_rate;
    cfg.pilot_bw = pilot_bw;
    cfg.maf_m = M;
    const RrcFilter rrc = design_rrc(0.65, 20, sps);
    const Demodulator dm(cfg, rrc, rx.size());
    return dm.estimate_phase(dm.analytic_spectrum(rx), pilot_freq);
}

/// f_quantum must be expressed relative to the same reference as est.phase_trace,
/// i.e. est.reference_freq plus the nominal pilot-to-quantum separation.
inline DemodResult synchronize_and_demodulate(const RealWaveform& rx, const PhaseEstimate& est, double f_quantum,
                                              const RrcFilter& rrc, int sps, const FrameReference& ref) {
    rx.validate();
    RxDspConfig cfg;
    cfg.sample_rate = rx.sample_rate;
    cfg.symbol_rate = rx.sample_rate / sps;
    const Demodulator dm(cfg, rrc, rx.size());
    const auto z = dm.analytic_spectrum(rx);
    return dm.align_and_decimate(dm.matched_output(z, f_quantum, est.phase_trace), ref);
}

}  // namespace cvqkd
