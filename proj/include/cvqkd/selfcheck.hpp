#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "cvqkd/channel.hpp"
#include "cvqkd/config.hpp"
#include "cvqkd/estimation.hpp"
#include "cvqkd/harness.hpp"
#include "cvqkd/receiver.hpp"
#include "cvqkd/transmitter.hpp"
#include "cvqkd/wavecore.hpp"

namespace cvqkd {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

inline std::string fmt_value(const char* f, double v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace detail

/// Fast built-in checks with closed-form expectations. Each runs in well under a second.
inline std::vector<CheckResult> run_selfcheck() {
    using Check = std::pair<std::string, std::function<CheckResult()>>;
    std::vector<Check> checks;

    checks.emplace_back("rrc_cascade_nyquist", [] {
        const RrcFilter rrc = design_rrc(0.65, 20, 20);
        const auto& h = rrc.taps();
        const auto L = static_cast<std::ptrdiff_t>(h.size());
        double peak = 0.0;
        double isi = 0.0;
        for (std::ptrdiff_t m = -10; m <= 10; ++m) {
            double acc = 0.0;
            for (std::ptrdiff_t j = 0; j < L; ++j) {
                const std::ptrdiff_t k = j + m * 20;
                if (k >= 0 && k < L) {
                    acc += h[static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(k)];
                }
            }
            if (m == 0) {
                peak = acc;
            } else {
                isi += std::abs(acc);
            }
        }
        return CheckResult{"", isi / peak < 1e-2, "isi/peak=" + detail::fmt_value("%.3e", isi / peak)};
    });

    checks.emplace_back("modulator_zero_drive_quadrature", [] {
        IqModulatorSpec m;
        m.extinction_ratio_db = 60.0;
        m.bias = 0.5 * m.v_pi;
        const double p = std::norm(arm_field(0.0, m.bias, m.v_pi, m.gamma()));
        const double expect = std::pow(std::cos(0.25 * M_PI), 2);
        return CheckResult{"", std::abs(p / expect - 1.0) < 0.01, "p=" + detail::fmt_value("%.5f", p)};
    });

    checks.emplace_back("quantizer_step", [] {
        UniformQuantizer q(3, 1.0);
        const double step = q.step();
        return CheckResult{"", std::abs(step - 0.25) < 1e-15, "step=" + detail::fmt_value("%.6f", step)};
    });

    checks.emplace_back("fiber_transmittance_100km", [] {
        ChannelSpec c;
        c.distance_km = 100.0;
        const double t = fiber_transmittance(c);
        return CheckResult{"", std::abs(t - std::pow(10.0, -1.6)) < 1e-12, "T=" + detail::fmt_value("%.6f", t)};
    });

    checks.emplace_back("holevo_zero_for_ideal_channel", [] {
        const double chi = holevo_bound(2.5, 1.0, 1.0, 0.0, 0.0);
        return CheckResult{"", std::abs(chi) < 1e-9, "chi=" + detail::fmt_value("%.3e", chi)};
    });

    checks.emplace_back("tone_psd_peak", [] {
        const std::size_t n = 1 << 14;
        ComplexWaveform w(n, 2e9);
        for (std::size_t k = 0; k < n; ++k) {
            w[k] = std::polar(1.0, 2.0 * M_PI * 500e6 * static_cast<double>(k) / 2e9);
        }
        const Spectrum sp = estimate_psd(w, 4096);
        std::size_t best = 0;
        for (std::size_t k = 1; k < sp.density.size(); ++k) {
            if (sp.density[k] > sp.density[best]) {
                best = k;
            }
        }
        const double f = sp.frequency[best];
        return CheckResult{"", std::abs(f - 500e6) <= sp.resolution, "peak=" + detail::fmt_value("%.4g Hz", f)};
    });

    checks.emplace_back("calibration_recovers_v_en", [] {
        DetectorSpec d;
        d.adc_full_scale = 0.02;
        const CalibrationRecord r = run_calibration(d, 200000, 2e9, 11, 12);
        const double expect = d.electronic_variance(2e9) / d.shot_variance(2e9);
        return CheckResult{"", std::abs(r.v_en() / expect - 1.0) < 0.05,
                           "v_en=" + detail::fmt_value("%.4f", r.v_en()) + " expected " + detail::fmt_value("%.4f", expect)};
    });

    checks.emplace_back("worker_count_independence", [] {
        RunConfig c;
        c.n_sym = 2000;
        c.k_copies = 3;
        c.distance_km = 5.0;
        c.n_workers = 1;
        const EstimationResult a = run_single(c).result;
        c.n_workers = 3;
        const EstimationResult b = run_single(c).result;
        const bool same = a.xi_a == b.xi_a && a.t_ch == b.t_ch && a.v_en == b.v_en;
        return CheckResult{"", same, "xi_a=" + detail::fmt_value("%.6g", a.xi_a)};
    });

    std::vector<CheckResult> out;
    for (auto& [name, fn] : checks) {
        CheckResult r;
        try {
            r = fn();
        } catch (const std::exception& e) {
            r.passed = false;
            r.detail = std::string("threw: ") + e.what();
        }
        r.name = name;
        out.push_back(r);
    }
    return out;
}

}  // namespace cvqkd
