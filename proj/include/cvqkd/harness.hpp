#pragma once

// Ensemble runner: one transmitted block, K independent channel + receiver + DSP copies
// spread over N worker threads, reduced in copy-index order.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cvqkd/channel.hpp"
#include "cvqkd/config.hpp"
#include "cvqkd/estimation.hpp"
#include "cvqkd/random.hpp"
#include "cvqkd/receiver.hpp"
#include "cvqkd/rxdsp.hpp"
#include "cvqkd/transmitter.hpp"
#include "cvqkd/wavecore.hpp"

namespace cvqkd {

/// Seed of the fixed synchronization preamble; shared by transmitter and receiver.
inline constexpr Seed kPreambleSeed = 0x5eed0000cafe0001ULL;

/// Copy index reserved for run-level captures (ADC ranging, raw calibration).
inline constexpr std::uint64_t kRunLevelCopy = std::numeric_limits<std::uint64_t>::max();

// ---------------------------------------------------------------------------
// Frame

/// Guard | preamble | data | guard, all at the symbol rate. Guards are zero.
inline SymbolBlock build_frame(const RunConfig& cfg, bool zero_modulation = false) {
    SymbolBlock f;
    f.symbol_rate = cfg.symbol_rate;
    f.x.assign(cfg.frame_symbols(), 0.0);
    f.p.assign(cfg.frame_symbols(), 0.0);
    const SymbolBlock pre = generate_gaussian_symbols(cfg.preamble_symbols, 2.0, kPreambleSeed, cfg.symbol_rate);
    std::copy(pre.x.begin(), pre.x.end(), f.x.begin() + static_cast<std::ptrdiff_t>(cfg.guard_symbols));
    std::copy(pre.p.begin(), pre.p.end(), f.p.begin() + static_cast<std::ptrdiff_t>(cfg.guard_symbols));
    if (!zero_modulation) {
        const SymbolBlock data = generate_gaussian_symbols(
            cfg.n_sym, 2.0, derive_seed(cfg.master_seed, 0, Stream::symbols), cfg.symbol_rate);
        std::copy(data.x.begin(), data.x.end(), f.x.begin() + static_cast<std::ptrdiff_t>(cfg.data_offset()));
        std::copy(data.p.begin(), data.p.end(), f.p.begin() + static_cast<std::ptrdiff_t>(cfg.data_offset()));
    }
    return f;
}

/// Preamble plus the parameter-estimation half of the data (even indices), which Alice reveals.
inline FrameReference build_reference(const RunConfig& cfg, const SymbolBlock& frame) {
    FrameReference r;
    r.n_symbols = frame.size();
    for (std::size_t m = cfg.guard_symbols; m < cfg.data_offset(); ++m) {
        r.positions.push_back(m);
    }
    for (std::size_t m = 0; m < cfg.n_sym; m += 2) {
        r.positions.push_back(cfg.data_offset() + m);
    }
    for (std::size_t m : r.positions) {
        r.symbols.emplace_back(frame.x[m], frame.p[m]);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Run context and per-copy processing

struct RunContext {
    RunConfig cfg;
    RrcFilter rrc;
    SymbolBlock frame;
    FrameReference reference;
    TransmitterOutput tx;
    DetectorSpec detector;
    CalibrationRecord raw_calibration;
    Demodulator demod;
    std::vector<double> xa_snu;  // parameter-estimation half, Alice, SNU
    std::vector<double> pa_snu;
};

struct CopyOutcome {
    CopyMoments moments;
    double v_en = 0.0;
    double snu_scale = 0.0;
    int tau = 0;
    double correlation = 0.0;
    double pilot_snr_db = std::numeric_limits<double>::quiet_NaN();
    double phase_error_var = std::numeric_limits<double>::quiet_NaN();  // rad^2 at symbol instants, pilot mode
};

namespace detail {

inline ComplexWaveform received_field(const RunContext& ctx, std::uint64_t copy, RealWaveform* truth = nullptr) {
    const auto& cfg = ctx.cfg;
    RealWaveform phi = phase_noise_trace(cfg.linewidth_hz, ctx.tx.field.size(), cfg.sample_rate,
                                         derive_seed(cfg.master_seed, copy, Stream::phase_noise));
    ComplexWaveform f = apply_channel(ctx.tx.field, cfg.channel(), phi);
    if (truth != nullptr) {
        *truth = std::move(phi);
    }
    return f;
}

inline double phase_error_variance(const RunContext& ctx, const PhaseEstimate& est, const RealWaveform& truth) {
    const auto& cfg = ctx.cfg;
    const auto sps = static_cast<std::size_t>(cfg.sps());
    const double ramp = kTwoPi * (cfg.rx_pilot_freq() - est.reference_freq) / cfg.sample_rate;
    std::vector<double> err;
    err.reserve(cfg.n_sym);
    for (std::size_t m = cfg.data_offset(); m < cfg.data_offset() + cfg.n_sym; ++m) {
        const std::size_t k = m * sps;
        err.push_back(est.phase_trace[k] - truth[k] - ramp * static_cast<double>(k));
    }
    double mean = 0.0;
    for (double e : err) {
        mean += e;
    }
    mean /= static_cast<double>(err.size());
    double v = 0.0;
    for (double e : err) {
        v += (e - mean) * (e - mean);
    }
    return v / static_cast<double>(err.size());
}

}  // namespace detail

inline RunContext prepare_run(const RunConfig& config, bool zero_modulation = false) {
    config.validate();
    RunContext ctx{config,
                   design_rrc(config.rrc_roll_off, config.rrc_span, config.sps()),
                   {},
                   {},
                   {},
                   config.detector(),
                   {},
                   Demodulator(config.rxdsp(), design_rrc(config.rrc_roll_off, config.rrc_span, config.sps()),
                               config.n_samples()),
                   {},
                   {}};
    ctx.frame = build_frame(config, zero_modulation);
    ctx.reference = build_reference(config, ctx.frame);
    ctx.tx = transmit(config.transmitter(), ctx.frame, ctx.rrc);

    // ADC range from a composite capture without the ADC.
    {
        RealWaveform phi = phase_noise_trace(config.linewidth_hz, ctx.tx.field.size(), config.sample_rate,
                                             derive_seed(config.master_seed, kRunLevelCopy, Stream::phase_noise));
        DetectOptions opt;
        opt.adc = false;
        const RealWaveform v = heterodyne_detect(apply_channel(ctx.tx.field, config.channel(), phi), ctx.detector,
                                                 derive_seed(config.master_seed, kRunLevelCopy, Stream::adc_ranging),
                                                 opt);
        ctx.detector.adc_full_scale = config.adc_loading * std::sqrt(mean_power(v));
    }
    ctx.raw_calibration = run_calibration(ctx.detector, config.n_samples(), config.sample_rate,
                                          derive_seed(config.master_seed, kRunLevelCopy, Stream::calib_electronic),
                                          derive_seed(config.master_seed, kRunLevelCopy, Stream::calib_shot));

    if (!zero_modulation) {
        double var = 0.0;
        for (std::size_t m = 0; m < config.n_sym; ++m) {
            const std::size_t i = config.data_offset() + m;
            var += ctx.frame.x[i] * ctx.frame.x[i] + ctx.frame.p[i] * ctx.frame.p[i];
        }
        var /= 2.0 * static_cast<double>(config.n_sym);
        const double scale = std::sqrt(ctx.tx.v_mod / var);
        for (std::size_t m = 0; m < config.n_sym; m += 2) {
            const std::size_t i = config.data_offset() + m;
            ctx.xa_snu.push_back(scale * ctx.frame.x[i]);
            ctx.pa_snu.push_back(scale * ctx.frame.p[i]);
        }
    }
    return ctx;
}

inline CopyOutcome run_copy(const RunContext& ctx, std::uint64_t copy) {
    const auto& cfg = ctx.cfg;
    const auto& dm = ctx.demod;
    CopyOutcome out;
    DemodResult demod;
    double f_q = cfg.rx_quantum_freq();
    {
        RealWaveform truth;
        const RealWaveform rx = heterodyne_detect(detail::received_field(ctx, copy, &truth), ctx.detector,
                                                  derive_seed(cfg.master_seed, copy, Stream::detector));
        const std::vector<cplx> z = dm.analytic_spectrum(rx);
        std::vector<double> trace;
        switch (cfg.phase_recovery) {
        case PhaseRecovery::pilot: {
            const double f0 = cfg.rx_pilot_freq();
            const double f_hat = locate_pilot(rx, f0 - cfg.pilot_search_halfwidth, f0 + cfg.pilot_search_halfwidth);
            PhaseEstimate est = dm.estimate_phase(z, f_hat);
            out.pilot_snr_db = est.pilot_snr_db;
            out.phase_error_var = detail::phase_error_variance(ctx, est, truth);
            f_q = est.reference_freq + (cfg.rx_quantum_freq() - cfg.rx_pilot_freq());
            trace = std::move(est.phase_trace);
            break;
        }
        case PhaseRecovery::oracle:
            trace = std::move(truth.samples);
            break;
        case PhaseRecovery::off:
            break;
        }
        demod = dm.align_and_decimate(dm.matched_output(z, f_q, trace), ctx.reference);
    }
    out.tau = demod.tau;
    out.correlation = demod.normalized_correlation;

    // Optical-switch captures processed through the same band selection and matched filter.
    const ComplexWaveform dark(cfg.n_samples(), cfg.sample_rate);
    DetectOptions lo_off;
    lo_off.signal_on = false;
    lo_off.lo_on = false;
    DetectOptions lo_on = lo_off;
    lo_on.lo_on = true;
    const auto symbol_noise = [&](const DetectOptions& opt, Stream stream) {
        const auto zc =
            dm.analytic_spectrum(heterodyne_detect(dark, ctx.detector, derive_seed(cfg.master_seed, copy, stream), opt));
        return dm.symbol_variance(dm.matched_output_noise(zc, f_q), cfg.data_offset(), cfg.n_sym);
    };
    const double v_el = symbol_noise(lo_off, Stream::calib_electronic);
    const double v_tot = symbol_noise(lo_on, Stream::calib_shot);
    const CalibrationRecord cal = make_calibration(v_el, v_tot);
    out.v_en = cal.v_en();
    out.snu_scale = cal.snu_scale;

    const double g = std::sqrt(cal.snu_scale);
    for (std::size_t j = 0; j < ctx.xa_snu.size(); ++j) {
        const std::size_t i = cfg.data_offset() + 2 * j;
        out.moments.x.add(ctx.xa_snu[j], g * demod.symbols.x[i]);
        out.moments.p.add(ctx.pa_snu[j], g * demod.symbols.p[i]);
    }
    return out;
}

namespace detail {

/// Rethrows the active exception as the same library type with the copy index prefixed.
[[noreturn]] inline void rethrow_with_copy(std::exception_ptr e, std::uint64_t copy) {
    const std::string prefix = "copy " + std::to_string(copy) + ": ";
    try {
        std::rethrow_exception(e);
    } catch (const FrameSyncError& x) {
        throw FrameSyncError(prefix + x.what());
    } catch (const SyncError& x) {
        throw SyncError(prefix + x.what());
    } catch (const PilotNotFoundError& x) {
        throw PilotNotFoundError(prefix + x.what());
    } catch (const CalibrationError& x) {
        throw CalibrationError(prefix + x.what());
    } catch (const ChannelEstimationError& x) {
        throw ChannelEstimationError(prefix + x.what());
    } catch (const PhysicsError& x) {
        throw PhysicsError(prefix + x.what());
    } catch (const ConfigError& x) {
        throw ConfigError(prefix + x.what());
    } catch (const ParameterError& x) {
        throw ParameterError(prefix + x.what());
    }
}

}  // namespace detail

/// Runs copies [0, k) over n_workers threads; outcomes are stored by copy index.
inline std::vector<CopyOutcome> run_copies(const RunContext& ctx, std::size_t k, std::size_t n_workers) {
    std::vector<CopyOutcome> out(k);
    std::vector<std::exception_ptr> errors(k);
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (std::size_t i = next.fetch_add(1); i < k; i = next.fetch_add(1)) {
            try {
                out[i] = run_copy(ctx, i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::min(std::max<std::size_t>(n_workers, 1), std::max<std::size_t>(k, 1));
    if (n_threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back(work);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        if (errors[i]) {
            detail::rethrow_with_copy(errors[i], i);
        }
    }
    return out;
}

struct RunOutput {
    EstimationResult result;
    double v_mod = 0.0;
    double rho_measured = 0.0;
    double p_pom = 0.0;
    double adc_full_scale = 0.0;
    CalibrationRecord raw_calibration;
    std::vector<CopyOutcome> copies;
};

inline EnsembleInputs ensemble_inputs(const std::vector<CopyOutcome>& copies) {
    EnsembleInputs in;
    for (const auto& c : copies) {
        in.copies.push_back(c.moments);
        in.v_en.push_back(c.v_en);
    }
    return in;
}

inline RunOutput run_single(const RunConfig& config) {
    const RunContext ctx = prepare_run(config);
    RunOutput out;
    out.v_mod = ctx.tx.v_mod;
    out.rho_measured = ctx.tx.rho_measured;
    out.p_pom = ctx.tx.p_pom;
    out.adc_full_scale = ctx.detector.adc_full_scale;
    out.raw_calibration = ctx.raw_calibration;
    out.copies = run_copies(ctx, config.k_copies, config.n_workers);
    out.result = estimate_ensemble(ensemble_inputs(out.copies), ctx.tx.v_mod, config.eta, config.beta,
                                   config.symbol_rate);
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps and CSV output

inline const std::vector<std::string>& sweep_axes() {
    static const std::vector<std::string> axes{"n_dac", "rho_db", "linewidth_hz", "distance_km", "maf_m", "delta_f"};
    return axes;
}

struct SweepSpec {
    std::string axis;
    std::vector<double> values;
    RunConfig fixed;
    std::string output_path;
};

inline void apply_axis(RunConfig& cfg, const std::string& axis, double value) {
    if (std::find(sweep_axes().begin(), sweep_axes().end(), axis) == sweep_axes().end()) {
        throw ConfigError("unsupported sweep axis '" + axis + "'");
    }
    std::ostringstream s;
    s.precision(17);
    s << value;
    set_value(cfg, axis, s.str());
}

/// Sweep file: the run keys plus axis = name, values = v1, v2, ... and optionally output = path.
inline SweepSpec parse_sweep(std::istream& in, const RunConfig& base = {}) {
    SweepSpec spec;
    spec.fixed = base;
    bool have_axis = false;
    for (const auto& [k, v] : parse_key_values(in)) {
        if (k == "axis") {
            spec.axis = v;
            have_axis = true;
        } else if (k == "values") {
            std::stringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ',')) {
                item = trim(item);
                if (!item.empty()) {
                    spec.values.push_back(parse_number(item));
                }
            }
        } else if (k == "output") {
            spec.output_path = v;
        } else {
            set_value(spec.fixed, k, v);
        }
    }
    if (!have_axis) {
        throw ConfigError("sweep file has no axis");
    }
    if (std::find(sweep_axes().begin(), sweep_axes().end(), spec.axis) == sweep_axes().end()) {
        throw ConfigError("unsupported sweep axis '" + spec.axis + "'");
    }
    // Reject bad values before any point runs.
    for (double v : spec.values) {
        RunConfig probe = spec.fixed;
        apply_axis(probe, spec.axis, v);
        probe.validate();
    }
    return spec;
}

inline const char* kCsvHeader =
    "axis_value,v_mod,t_ch,v_en,xi_a_msnu,i_ab,chi_be,skr_bps,skr_raw,n_symbols,n_copies,status";

inline std::string format_axis_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string csv_row(double axis_value, const EstimationResult& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%zu,%zu,%s",
                  format_axis_value(axis_value).c_str(), r.v_mod, r.t_ch, r.v_en, r.xi_a * 1e3, r.i_ab, r.chi_be,
                  r.skr_bps, r.skr_raw, r.n_symbols_used, r.n_copies, r.status.c_str());
    return buf;
}

/// Axis values already present in an existing CSV.
inline std::set<std::string> completed_rows(const std::string& path) {
    std::set<std::string> done;
    std::ifstream in(path);
    if (!in) {
        return done;
    }
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (const auto comma = line.find(','); comma != std::string::npos) {
            done.insert(line.substr(0, comma));
        }
    }
    return done;
}

struct SweepRow {
    double axis_value = 0.0;
    EstimationResult result;
    bool skipped = false;  // already present in the output file
};

/// One row per value, appended and flushed as it completes. Per-point failures go to the status column.
inline std::vector<SweepRow> run_sweep(const SweepSpec& spec,
                                       const std::function<void(const SweepRow&)>& on_row = {}) {
    std::vector<SweepRow> rows;
    std::set<std::string> done;
    std::ofstream csv;
    if (!spec.output_path.empty()) {
        done = completed_rows(spec.output_path);
        const bool fresh = !std::ifstream(spec.output_path).good();
        csv.open(spec.output_path, std::ios::app);
        if (!csv) {
            throw IoError("cannot write '" + spec.output_path + "'");
        }
        if (fresh) {
            csv << kCsvHeader << '\n' << std::flush;
        }
    }
    for (double v : spec.values) {
        SweepRow row;
        row.axis_value = v;
        if (done.count(format_axis_value(v)) > 0) {
            row.skipped = true;
            rows.push_back(row);
            continue;
        }
        RunConfig cfg = spec.fixed;
        apply_axis(cfg, spec.axis, v);
        try {
            row.result = run_single(cfg).result;
        } catch (const Error& e) {
            row.result = EstimationResult{};
            row.result.status = std::string("error: ") + e.what();
            std::replace(row.result.status.begin(), row.result.status.end(), ',', ';');
        }
        if (csv.is_open()) {
            csv << csv_row(v, row.result) << '\n' << std::flush;
        }
        if (on_row) {
            on_row(row);
        }
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Spectra

enum class ProbePoint { tx_output, rx_output };

inline Spectrum export_psd(const RunConfig& config, ProbePoint stage, bool zero_modulation = false,
                           std::size_t segment_len = 32768) {
    const RunContext ctx = prepare_run(config, zero_modulation);
    if (stage == ProbePoint::tx_output) {
        return estimate_psd(ctx.tx.field, segment_len);
    }
    const RealWaveform rx = heterodyne_detect(detail::received_field(ctx, 0), ctx.detector,
                                              derive_seed(config.master_seed, 0, Stream::detector));
    return estimate_psd(rx, segment_len);
}

inline void write_psd_csv(const std::string& path, const Spectrum& sp) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write '" + path + "'");
    }
    out << "frequency_hz,psd_per_hz\n";
    char buf[96];
    for (std::size_t m = 0; m < sp.frequency.size(); ++m) {
        std::snprintf(buf, sizeof buf, "%.10g,%.10g\n", sp.frequency[m], sp.density[m]);
        out << buf;
    }
}

}  // namespace cvqkd
