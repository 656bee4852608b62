#pragma once

// Waveform containers and the DSP primitives shared by the transmitter,
// receiver and receiver-DSP stages.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cvqkd/errors.hpp"
#include "cvqkd/fft.hpp"

namespace cvqkd {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Uniformly sampled complex baseband signal.
struct ComplexWaveform {
    std::vector<cplx> samples;
    double sample_rate = 0.0;

    ComplexWaveform() = default;
    ComplexWaveform(std::vector<cplx> s, double fs) : samples(std::move(s)), sample_rate(fs) {}
    ComplexWaveform(std::size_t n, double fs) : samples(n), sample_rate(fs) {}

    std::size_t size() const { return samples.size(); }
    cplx& operator[](std::size_t k) { return samples[k]; }
    const cplx& operator[](std::size_t k) const { return samples[k]; }

    void validate() const {
        detail::require(sample_rate > 0.0, "waveform sample_rate must be > 0");
        detail::require(!samples.empty(), "waveform must not be empty");
    }
};

/// Uniformly sampled real signal (drive voltages, photocurrents, phase traces).
struct RealWaveform {
    std::vector<double> samples;
    double sample_rate = 0.0;

    RealWaveform() = default;
    RealWaveform(std::vector<double> s, double fs) : samples(std::move(s)), sample_rate(fs) {}
    RealWaveform(std::size_t n, double fs) : samples(n), sample_rate(fs) {}

    std::size_t size() const { return samples.size(); }
    double& operator[](std::size_t k) { return samples[k]; }
    const double& operator[](std::size_t k) const { return samples[k]; }

    void validate() const {
        detail::require(sample_rate > 0.0, "waveform sample_rate must be > 0");
        detail::require(!samples.empty(), "waveform must not be empty");
    }
};

/// Paired quadrature symbol sequences at the symbol rate.
struct SymbolBlock {
    std::vector<double> x;
    std::vector<double> p;
    double symbol_rate = 0.0;

    std::size_t size() const { return x.size(); }

    void validate() const {
        detail::require(x.size() == p.size(), "symbol block quadratures differ in length");
        detail::require(!x.empty(), "symbol block must not be empty");
        detail::require(symbol_rate > 0.0, "symbol_rate must be > 0");
    }
};

namespace detail {

template <typename W>
void require_compatible(const W& a, const W& b) {
    a.validate();
    b.validate();
    require(a.sample_rate == b.sample_rate, "waveform sample rates differ");
    require(a.size() == b.size(), "waveform lengths differ");
}

}  // namespace detail

inline ComplexWaveform operator+(const ComplexWaveform& a, const ComplexWaveform& b) {
    detail::require_compatible(a, b);
    ComplexWaveform out(a.size(), a.sample_rate);
    for (std::size_t k = 0; k < a.size(); ++k) {
        out[k] = a[k] + b[k];
    }
    return out;
}

inline ComplexWaveform operator-(const ComplexWaveform& a, const ComplexWaveform& b) {
    detail::require_compatible(a, b);
    ComplexWaveform out(a.size(), a.sample_rate);
    for (std::size_t k = 0; k < a.size(); ++k) {
        out[k] = a[k] - b[k];
    }
    return out;
}

inline ComplexWaveform operator*(cplx g, const ComplexWaveform& a) {
    ComplexWaveform out(a.size(), a.sample_rate);
    for (std::size_t k = 0; k < a.size(); ++k) {
        out[k] = g * a[k];
    }
    return out;
}

inline double energy(std::span<const cplx> s) {
    double e = 0.0;
    for (const auto& v : s) {
        e += std::norm(v);
    }
    return e;
}

inline double energy(const ComplexWaveform& w) { return energy(std::span<const cplx>(w.samples)); }

inline double mean_power(const ComplexWaveform& w) {
    w.validate();
    return energy(w) / static_cast<double>(w.size());
}

inline double mean_power(const RealWaveform& w) {
    w.validate();
    double e = 0.0;
    for (double v : w.samples) {
        e += v * v;
    }
    return e / static_cast<double>(w.size());
}

inline ComplexWaveform to_complex(const RealWaveform& w) {
    ComplexWaveform out(w.size(), w.sample_rate);
    std::transform(w.samples.begin(), w.samples.end(), out.samples.begin(),
                   [](double v) { return cplx(v, 0.0); });
    return out;
}

// ---------------------------------------------------------------------------
// Root-raised-cosine pulse shaping

/// Root-raised-cosine FIR. Taps are symmetric about the center and have unit energy.
class RrcFilter {
public:
    RrcFilter() = default;

    double roll_off() const { return roll_off_; }
    int span_symbols() const { return span_; }
    int samples_per_symbol() const { return sps_; }
    const std::vector<double>& taps() const { return taps_; }
    std::size_t size() const { return taps_.size(); }
    /// Index of the center tap; the filter's group delay in samples.
    std::size_t center() const { return taps_.size() / 2; }

    friend RrcFilter design_rrc(double roll_off, int span_symbols, int samples_per_symbol);

private:
    double roll_off_ = 0.0;
    int span_ = 0;
    int sps_ = 0;
    std::vector<double> taps_;
};

namespace detail {

/// Continuous RRC impulse response, t in symbol periods (unnormalized).
inline double rrc_value(double t, double beta) {
    constexpr double eps = 1e-9;
    if (std::abs(t) < eps) {
        return 1.0 - beta + 4.0 * beta / kPi;
    }
    if (std::abs(std::abs(t) - 1.0 / (4.0 * beta)) < eps) {
        const double a = kPi / (4.0 * beta);
        return beta / std::numbers::sqrt2 *
               ((1.0 + 2.0 / kPi) * std::sin(a) + (1.0 - 2.0 / kPi) * std::cos(a));
    }
    const double num = std::sin(kPi * t * (1.0 - beta)) + 4.0 * beta * t * std::cos(kPi * t * (1.0 + beta));
    const double den = kPi * t * (1.0 - 16.0 * beta * beta * t * t);
    return num / den;
}

}  // namespace detail

inline RrcFilter design_rrc(double roll_off, int span_symbols, int samples_per_symbol) {
    if (!(roll_off > 0.0 && roll_off <= 1.0)) {
        throw ParameterError("RRC roll-off must lie in (0, 1]");
    }
    if (span_symbols < 2 || samples_per_symbol < 2) {
        throw ParameterError("RRC span_symbols and samples_per_symbol must be >= 2");
    }
    RrcFilter f;
    f.roll_off_ = roll_off;
    f.span_ = span_symbols;
    f.sps_ = samples_per_symbol;
    const int n = span_symbols * samples_per_symbol + 1;
    const int half = n / 2;
    f.taps_.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double t = static_cast<double>(k - half) / samples_per_symbol;
        f.taps_[static_cast<std::size_t>(k)] = detail::rrc_value(t, roll_off);
    }
    // Mirror so symmetry is exact in floating point.
    for (int k = 0; k < half; ++k) {
        f.taps_[static_cast<std::size_t>(n - 1 - k)] = f.taps_[static_cast<std::size_t>(k)];
    }
    double e = 0.0;
    for (double v : f.taps_) {
        e += v * v;
    }
    const double scale = 1.0 / std::sqrt(e);
    for (double& v : f.taps_) {
        v *= scale;
    }
    return f;
}

// ---------------------------------------------------------------------------
// Resampling and filtering

inline ComplexWaveform upsample_zeros(const SymbolBlock& symbols, int factor) {
    symbols.validate();
    if (factor < 1) {
        throw ParameterError("upsampling factor must be a positive integer");
    }
    const auto f = static_cast<std::size_t>(factor);
    ComplexWaveform out(symbols.size() * f, symbols.symbol_rate * factor);
    for (std::size_t k = 0; k < symbols.size(); ++k) {
        out[k * f] = cplx(symbols.x[k], symbols.p[k]);
    }
    return out;
}

/// Upsampling factor for a sample/symbol rate pair; throws unless it is an integer.
inline int integer_ratio(double sample_rate, double symbol_rate) {
    const double r = sample_rate / symbol_rate;
    const double ri = std::round(r);
    if (ri < 1.0 || std::abs(r - ri) > 1e-9 * r) {
        throw ParameterError("F_s / R_s must be a positive integer");
    }
    return static_cast<int>(ri);
}

/// Linear FIR filtering with "same"-length output, aligned on the center tap.
inline ComplexWaveform fir_filter_same(const ComplexWaveform& w, std::span<const double> taps) {
    w.validate();
    detail::require(!taps.empty(), "FIR taps must not be empty");
    const auto n = static_cast<std::ptrdiff_t>(w.size());
    const auto L = static_cast<std::ptrdiff_t>(taps.size());
    const std::ptrdiff_t c = L / 2;
    ComplexWaveform out(w.size(), w.sample_rate);
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        cplx acc{0.0, 0.0};
        const std::ptrdiff_t j_lo = std::max<std::ptrdiff_t>(0, k + c - (n - 1));
        const std::ptrdiff_t j_hi = std::min<std::ptrdiff_t>(L - 1, k + c);
        for (std::ptrdiff_t j = j_lo; j <= j_hi; ++j) {
            acc += taps[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(k + c - j)];
        }
        out[static_cast<std::size_t>(k)] = acc;
    }
    return out;
}

/// upsample_zeros followed by fir_filter_same with the RRC, computed polyphase.
inline ComplexWaveform pulse_shape(const SymbolBlock& symbols, const RrcFilter& rrc) {
    symbols.validate();
    const int sps = rrc.samples_per_symbol();
    const auto& h = rrc.taps();
    const auto n_sym = static_cast<std::ptrdiff_t>(symbols.size());
    const auto n = n_sym * sps;
    const auto c = static_cast<std::ptrdiff_t>(rrc.center());
    const auto L = static_cast<std::ptrdiff_t>(h.size());
    ComplexWaveform out(static_cast<std::size_t>(n), symbols.symbol_rate * sps);
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        // out[k] = sum_m h[k + c - m*sps] * s[m]
        const std::ptrdiff_t m_lo = std::max<std::ptrdiff_t>(0, (k + c - (L - 1) + sps - 1) / sps);
        const std::ptrdiff_t m_hi = std::min<std::ptrdiff_t>(n_sym - 1, (k + c) / sps);
        cplx acc{0.0, 0.0};
        for (std::ptrdiff_t m = m_lo; m <= m_hi; ++m) {
            const double tap = h[static_cast<std::size_t>(k + c - m * sps)];
            acc += tap * cplx(symbols.x[static_cast<std::size_t>(m)], symbols.p[static_cast<std::size_t>(m)]);
        }
        out[static_cast<std::size_t>(k)] = acc;
    }
    return out;
}

inline ComplexWaveform frequency_shift(const ComplexWaveform& w, double f) {
    w.validate();
    if (std::abs(f) >= w.sample_rate / 2.0) {
        throw ParameterError("frequency shift must be below Nyquist");
    }
    ComplexWaveform out(w.size(), w.sample_rate);
    const double step = kTwoPi * f / w.sample_rate;
    for (std::size_t k = 0; k < w.size(); ++k) {
        // Phase from k directly; no accumulated drift over long blocks.
        out[k] = w[k] * std::polar(1.0, step * static_cast<double>(k));
    }
    return out;
}

/// Centered moving average of width M with shrunken windows at the edges.
/// M = 0 and M = 1 are the identity. For even M the window is [k - M/2, k + M/2 - 1].
inline ComplexWaveform moving_average(const ComplexWaveform& w, std::size_t M) {
    w.validate();
    if (M > w.size()) {
        throw ParameterError("moving-average length exceeds waveform length");
    }
    if (M <= 1) {
        return w;
    }
    const auto n = static_cast<std::ptrdiff_t>(w.size());
    std::vector<cplx> prefix(w.size() + 1, cplx{0.0, 0.0});
    for (std::size_t k = 0; k < w.size(); ++k) {
        prefix[k + 1] = prefix[k] + w[k];
    }
    const auto before = static_cast<std::ptrdiff_t>(M / 2);
    const auto after = static_cast<std::ptrdiff_t>(M) - before - 1;
    ComplexWaveform out(w.size(), w.sample_rate);
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, k - before);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, k + after);
        const auto count = static_cast<double>(hi - lo + 1);
        out[static_cast<std::size_t>(k)] =
            (prefix[static_cast<std::size_t>(hi + 1)] - prefix[static_cast<std::size_t>(lo)]) / count;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Quantization

/// Mid-rise uniform quantizer with 2^n_bits levels spanning [-full_scale, +full_scale].
class UniformQuantizer {
public:
    UniformQuantizer(int n_bits, double full_scale) : n_bits_(n_bits), full_scale_(full_scale) {
        if (n_bits < 1 || n_bits > 30) {
            throw ParameterError("quantizer resolution must be between 1 and 30 bits");
        }
        if (!(full_scale > 0.0)) {
            throw ParameterError("quantizer full scale must be > 0");
        }
        levels_ = std::ldexp(1.0, n_bits);
        step_ = 2.0 * full_scale / levels_;
    }

    double step() const { return step_; }
    int bits() const { return n_bits_; }
    double full_scale() const { return full_scale_; }

    double operator()(double v) const {
        double idx = std::floor((v + full_scale_) / step_);
        idx = std::clamp(idx, 0.0, levels_ - 1.0);
        return (idx + 0.5) * step_ - full_scale_;
    }

private:
    int n_bits_;
    double full_scale_;
    double levels_ = 0.0;
    double step_ = 0.0;
};

inline ComplexWaveform quantize_uniform(const ComplexWaveform& w, int n_bits, double full_scale) {
    w.validate();
    const UniformQuantizer q(n_bits, full_scale);
    ComplexWaveform out(w.size(), w.sample_rate);
    for (std::size_t k = 0; k < w.size(); ++k) {
        out[k] = cplx(q(w[k].real()), q(w[k].imag()));
    }
    return out;
}

inline RealWaveform quantize_uniform(const RealWaveform& w, int n_bits, double full_scale) {
    w.validate();
    const UniformQuantizer q(n_bits, full_scale);
    RealWaveform out(w.size(), w.sample_rate);
    for (std::size_t k = 0; k < w.size(); ++k) {
        out[k] = q(w[k]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spectral estimation

/// Two-sided power spectral density on an ascending frequency grid [-fs/2, fs/2).
struct Spectrum {
    std::vector<double> frequency;  // Hz
    std::vector<double> density;    // power / Hz
    double resolution = 0.0;        // bin spacing, Hz

    /// Integrated power over [f_lo, f_hi] (inclusive bin centers).
    double band_power(double f_lo, double f_hi) const {
        double p = 0.0;
        for (std::size_t k = 0; k < frequency.size(); ++k) {
            if (frequency[k] >= f_lo && frequency[k] <= f_hi) {
                p += density[k];
            }
        }
        return p * resolution;
    }

    double total_power() const {
        return std::accumulate(density.begin(), density.end(), 0.0) * resolution;
    }

    std::size_t peak_index() const {
        return static_cast<std::size_t>(
            std::distance(density.begin(), std::max_element(density.begin(), density.end())));
    }
};

inline std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t k = 0; k < n; ++k) {
        w[k] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(k) / static_cast<double>(n));
    }
    return w;
}

/// Averaged periodogram, Hann window, 50% overlap.
inline Spectrum estimate_psd(const ComplexWaveform& w, std::size_t segment_len) {
    w.validate();
    if (!fft::is_pow2(segment_len) || segment_len < 2) {
        throw ParameterError("PSD segment length must be a power of two");
    }
    if (segment_len > w.size()) {
        throw ParameterError("PSD segment length exceeds waveform length");
    }
    const auto win = hann_window(segment_len);
    double win_energy = 0.0;
    for (double v : win) {
        win_energy += v * v;
    }
    const std::size_t hop = segment_len / 2;
    const std::size_t n_seg = (w.size() - segment_len) / hop + 1;
    std::vector<double> acc(segment_len, 0.0);
    std::vector<cplx> buf(segment_len);
    for (std::size_t s = 0; s < n_seg; ++s) {
        const std::size_t off = s * hop;
        for (std::size_t k = 0; k < segment_len; ++k) {
            buf[k] = w[off + k] * win[k];
        }
        fft::forward(buf);
        for (std::size_t k = 0; k < segment_len; ++k) {
            acc[k] += std::norm(buf[k]);
        }
    }
    Spectrum sp;
    sp.resolution = w.sample_rate / static_cast<double>(segment_len);
    sp.frequency.resize(segment_len);
    sp.density.resize(segment_len);
    const double norm = 1.0 / (static_cast<double>(n_seg) * w.sample_rate * win_energy);
    const std::size_t half = segment_len / 2;
    for (std::size_t m = 0; m < segment_len; ++m) {
        const std::size_t src = (m + half) % segment_len;
        sp.frequency[m] = (static_cast<double>(m) - static_cast<double>(half)) * sp.resolution;
        sp.density[m] = acc[src] * norm;
    }
    return sp;
}

inline Spectrum estimate_psd(const RealWaveform& w, std::size_t segment_len) {
    return estimate_psd(to_complex(w), segment_len);
}

// ---------------------------------------------------------------------------
// Phase helpers

/// Nearest-multiple-of-2pi continuation.
inline void unwrap_in_place(std::vector<double>& phase) {
    if (phase.empty()) {
        return;
    }
    double offset = 0.0;
    double prev_raw = phase[0];
    for (std::size_t k = 1; k < phase.size(); ++k) {
        const double raw = phase[k];
        offset -= kTwoPi * std::round((raw - prev_raw) / kTwoPi);
        phase[k] = raw + offset;
        prev_raw = raw;
    }
}

}  // namespace cvqkd
