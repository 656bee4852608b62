#pragma once

// Run configuration: every system parameter with its default, flat key = value files,
// --set overrides and derived quantities for the individual stages.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cvqkd/channel.hpp"
#include "cvqkd/errors.hpp"
#include "cvqkd/receiver.hpp"
#include "cvqkd/rxdsp.hpp"
#include "cvqkd/transmitter.hpp"

namespace cvqkd {

enum class PhaseRecovery { pilot, off, oracle };

struct RunConfig {
    // sampling and shaping
    double sample_rate = 2e9;
    double symbol_rate = 100e6;
    double rrc_roll_off = 0.65;
    int rrc_span = 20;

    // pilot and band plan
    PilotKind pilot_mode = PilotKind::electrical;
    double f_uc_ep = 500e6;
    double f_uc_op = 400e6;
    double f_pilot = 100e6;
    double delta_f = std::numeric_limits<double>::quiet_NaN();      // pilot-quantum separation, overrides the plan
    double freq_offset = std::numeric_limits<double>::quiet_NaN();  // default: EP 0, OP 100 MHz
    double rho_db = 34.0;

    // transmitter hardware
    int n_dac = 12;
    double dac_loading = 4.0;
    double ep_full_scale_vpi = 0.5;
    double v_pi = 1.0;
    double extinction_ratio_db = 35.0;
    double iq_imbalance_db = 0.0;
    double laser_power_w = 1e-3;
    double wavelength_m = 1550e-9;
    double v_mod = 2.5;

    // channel
    double loss_db_per_km = 0.16;
    double distance_km = 100.0;
    double linewidth_hz = 0.0;

    // receiver hardware
    double responsivity = 1.0;
    double nep = 7e-12;
    double tia_gain = 3500.0;
    double detector_bandwidth_hz = 800e6;
    int adc_bits = 12;
    double adc_loading = 4.0;
    double lo_power_w = 1.5e-3;
    double eta = 0.7;

    // receiver DSP
    double pilot_bw = 30e6;
    std::size_t maf_m = 0;
    PhaseRecovery phase_recovery = PhaseRecovery::pilot;
    double pilot_search_halfwidth = 20e6;

    // protocol and ensemble
    double beta = 0.95;
    std::size_t n_sym = 100000;
    std::size_t k_copies = 100;
    std::size_t n_workers = 1;
    std::uint64_t master_seed = 1;
    std::size_t guard_symbols = 16;
    std::size_t preamble_symbols = 256;

    // ---- derived quantities

    int sps() const { return integer_ratio(sample_rate, symbol_rate); }

    double freq_offset_hz() const {
        if (!std::isnan(freq_offset)) {
            return freq_offset;
        }
        if (pilot_mode == PilotKind::electrical) {
            return 0.0;
        }
        // OP: place the beat carrier so the quantum band sits where EP puts it.
        return f_uc_ep - tx_pilot().f_uc;
    }

    /// Pilot plan at the transmitter. delta_f moves the pilot (EP) or the quantum subcarrier (OP)
    /// while the quantum band at the receiver stays at f_uc_ep.
    PilotMode tx_pilot() const {
        PilotMode p;
        p.kind = pilot_mode;
        if (pilot_mode == PilotKind::electrical) {
            p.f_uc = f_uc_ep;
            p.f_pilot = std::isnan(delta_f) ? f_pilot : f_uc_ep - delta_f;
        } else {
            p.f_uc = std::isnan(delta_f) ? f_uc_op : delta_f;
            p.f_pilot = 0.0;
        }
        return p;
    }

    /// Nominal pilot and quantum-band centers in the detected signal.
    double rx_pilot_freq() const { return tx_pilot().f_pilot + freq_offset_hz(); }
    double rx_quantum_freq() const { return tx_pilot().f_uc + freq_offset_hz(); }

    std::size_t frame_symbols() const { return 2 * guard_symbols + preamble_symbols + n_sym; }
    std::size_t data_offset() const { return guard_symbols + preamble_symbols; }
    std::size_t n_samples() const { return frame_symbols() * static_cast<std::size_t>(sps()); }

    TransmitterConfig transmitter() const {
        TransmitterConfig t;
        t.sample_rate = sample_rate;
        t.symbol_rate = symbol_rate;
        t.pilot = tx_pilot();
        t.rho_db = rho_db;
        t.n_dac = n_dac;
        t.dac_loading = dac_loading;
        t.ep_full_scale_vpi = ep_full_scale_vpi;
        t.modulator.v_pi = v_pi;
        t.modulator.extinction_ratio_db = extinction_ratio_db;
        t.modulator.iq_imbalance_db = iq_imbalance_db;
        t.laser.power_w = laser_power_w;
        t.laser.wavelength_m = wavelength_m;
        t.target_vmod = v_mod;
        return t;
    }

    ChannelSpec channel() const {
        ChannelSpec c;
        c.distance_km = distance_km;
        c.loss_db_per_km = loss_db_per_km;
        c.linewidth_total_hz = linewidth_hz;
        c.freq_offset_hz = freq_offset_hz();
        return c;
    }

    /// Detector without the ADC range (set by auto-ranging at run time).
    DetectorSpec detector() const {
        DetectorSpec d;
        d.responsivity = responsivity;
        d.nep = nep;
        d.tia_gain = tia_gain;
        d.bandwidth_hz = detector_bandwidth_hz;
        d.adc_bits = adc_bits;
        d.lo_power_w = lo_power_w;
        d.efficiency_eta = eta;
        d.wavelength_m = wavelength_m;
        return d;
    }

    RxDspConfig rxdsp() const {
        RxDspConfig r;
        r.sample_rate = sample_rate;
        r.symbol_rate = symbol_rate;
        r.pilot_bw = pilot_bw;
        r.maf_m = maf_m;
        r.detector_bandwidth = detector_bandwidth_hz;
        return r;
    }

    void validate() const {
        const auto need = [](bool ok, const char* what) {
            if (!ok) {
                throw ConfigError(what);
            }
        };
        need(sample_rate > 0.0 && symbol_rate > 0.0, "sample_rate and symbol_rate must be > 0");
        try {
            (void)sps();
        } catch (const ParameterError& e) {
            throw ConfigError(e.what());
        }
        need(rrc_roll_off > 0.0 && rrc_roll_off <= 1.0, "rrc_roll_off must lie in (0, 1]");
        need(rrc_span >= 2, "rrc_span must be >= 2");
        need(n_dac >= 0 && n_dac <= 30, "n_dac must lie in [0, 30]");
        need(adc_bits >= 1 && adc_bits <= 30, "adc_bits must lie in [1, 30]");
        need(dac_loading > 0.0 && adc_loading > 0.0, "loading factors must be > 0");
        need(v_pi > 0.0 && extinction_ratio_db > 0.0, "v_pi and extinction ratio must be > 0");
        need(v_mod > 0.0, "v_mod must be > 0");
        need(distance_km >= 0.0 && loss_db_per_km >= 0.0 && linewidth_hz >= 0.0, "channel parameters must be >= 0");
        need(eta > 0.0 && eta <= 1.0, "eta must lie in (0, 1]");
        need(lo_power_w > 0.0 && responsivity > 0.0 && tia_gain > 0.0 && nep >= 0.0, "detector parameters invalid");
        need(detector_bandwidth_hz > 0.0 && detector_bandwidth_hz < sample_rate / 2.0,
             "detector bandwidth must lie below Nyquist");
        need(pilot_bw > 0.0, "pilot_bw must be > 0");
        need(beta > 0.0 && beta <= 1.0, "beta must lie in (0, 1]");
        need(n_sym >= 16, "n_sym must be >= 16");
        need(k_copies >= 1, "k_copies must be >= 1");
        need(n_workers >= 1, "n_workers must be >= 1");
        need(preamble_symbols >= 16, "preamble_symbols must be >= 16");
        need(maf_m <= n_samples(), "maf_m exceeds the capture length");
        tx_pilot().validate(rrc_roll_off, symbol_rate, sample_rate);
        const double half_band = (1.0 + rrc_roll_off) * symbol_rate / 2.0;
        need(std::abs(rx_quantum_freq()) + half_band < sample_rate / 2.0, "received quantum band exceeds Nyquist");
        need(rx_quantum_freq() - half_band > 0.0, "received quantum band must lie at positive frequency");
        if (phase_recovery == PhaseRecovery::pilot) {
            need(rx_pilot_freq() - pilot_search_halfwidth > 0.0, "received pilot must lie at positive frequency");
            need(pilot_bw / 2.0 < std::abs(rx_quantum_freq() - rx_pilot_freq()) - half_band,
                 "pilot filter overlaps the quantum band");
        }
        try {
            detector().validate();
        } catch (const ParameterError& e) {
            throw ConfigError(e.what());
        }
    }
};

// ---------------------------------------------------------------------------
// Parsing

/// Parses a number with an optional k / M / G suffix.
inline double parse_number(const std::string& text) {
    std::string s = text;
    double mult = 1.0;
    if (!s.empty()) {
        switch (s.back()) {
        case 'k': mult = 1e3; s.pop_back(); break;
        case 'M': mult = 1e6; s.pop_back(); break;
        case 'G': mult = 1e9; s.pop_back(); break;
        default: break;
        }
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("not a number: '" + text + "'");
    }
    if (used != s.size()) {
        throw ConfigError("not a number: '" + text + "'");
    }
    return v * mult;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

namespace detail {

inline std::size_t to_count(double v, const std::string& key) {
    if (!(v >= 0.0) || v != std::floor(v) || v > 9.0e15) {
        throw ConfigError(key + " must be a non-negative integer");
    }
    return static_cast<std::size_t>(v);
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        const auto real = [&t](const std::string& key, double RunConfig::*field) {
            t[key] = [field](RunConfig& c, const std::string& v) { c.*field = parse_number(v); };
        };
        const auto integer = [&t](const std::string& key, int RunConfig::*field) {
            t[key] = [field, key](RunConfig& c, const std::string& v) {
                c.*field = static_cast<int>(to_count(parse_number(v), key));
            };
        };
        const auto count = [&t](const std::string& key, std::size_t RunConfig::*field) {
            t[key] = [field, key](RunConfig& c, const std::string& v) { c.*field = to_count(parse_number(v), key); };
        };
        real("sample_rate", &RunConfig::sample_rate);
        real("symbol_rate", &RunConfig::symbol_rate);
        real("rrc_roll_off", &RunConfig::rrc_roll_off);
        integer("rrc_span", &RunConfig::rrc_span);
        real("f_uc_ep", &RunConfig::f_uc_ep);
        real("f_uc_op", &RunConfig::f_uc_op);
        real("f_pilot", &RunConfig::f_pilot);
        real("delta_f", &RunConfig::delta_f);
        real("freq_offset", &RunConfig::freq_offset);
        real("rho_db", &RunConfig::rho_db);
        integer("n_dac", &RunConfig::n_dac);
        real("dac_loading", &RunConfig::dac_loading);
        real("ep_full_scale_vpi", &RunConfig::ep_full_scale_vpi);
        real("v_pi", &RunConfig::v_pi);
        real("extinction_ratio_db", &RunConfig::extinction_ratio_db);
        real("iq_imbalance_db", &RunConfig::iq_imbalance_db);
        real("laser_power_w", &RunConfig::laser_power_w);
        real("wavelength_m", &RunConfig::wavelength_m);
        real("v_mod", &RunConfig::v_mod);
        real("loss_db_per_km", &RunConfig::loss_db_per_km);
        real("distance_km", &RunConfig::distance_km);
        real("linewidth_hz", &RunConfig::linewidth_hz);
        real("responsivity", &RunConfig::responsivity);
        real("nep", &RunConfig::nep);
        real("tia_gain", &RunConfig::tia_gain);
        real("detector_bandwidth_hz", &RunConfig::detector_bandwidth_hz);
        integer("adc_bits", &RunConfig::adc_bits);
        real("adc_loading", &RunConfig::adc_loading);
        real("lo_power_w", &RunConfig::lo_power_w);
        real("eta", &RunConfig::eta);
        real("pilot_bw", &RunConfig::pilot_bw);
        count("maf_m", &RunConfig::maf_m);
        real("pilot_search_halfwidth", &RunConfig::pilot_search_halfwidth);
        real("beta", &RunConfig::beta);
        count("n_sym", &RunConfig::n_sym);
        count("k_copies", &RunConfig::k_copies);
        count("n_workers", &RunConfig::n_workers);
        count("guard_symbols", &RunConfig::guard_symbols);
        count("preamble_symbols", &RunConfig::preamble_symbols);
        t["master_seed"] = [](RunConfig& c, const std::string& v) {
            try {
                std::size_t used = 0;
                c.master_seed = std::stoull(v, &used);
                if (used != v.size()) {
                    throw ConfigError("bad seed");
                }
            } catch (const std::exception&) {
                throw ConfigError("master_seed must be an unsigned integer");
            }
        };
        t["pilot_mode"] = [](RunConfig& c, const std::string& v) {
            if (v == "ep" || v == "electrical") {
                c.pilot_mode = PilotKind::electrical;
            } else if (v == "op" || v == "optical") {
                c.pilot_mode = PilotKind::optical;
            } else {
                throw ConfigError("pilot_mode must be ep or op");
            }
        };
        t["phase_recovery"] = [](RunConfig& c, const std::string& v) {
            if (v == "pilot") {
                c.phase_recovery = PhaseRecovery::pilot;
            } else if (v == "off") {
                c.phase_recovery = PhaseRecovery::off;
            } else if (v == "oracle") {
                c.phase_recovery = PhaseRecovery::oracle;
            } else {
                throw ConfigError("phase_recovery must be pilot, off or oracle");
            }
        };
        return t;
    }();
    return table;
}

}  // namespace detail

inline bool is_config_key(const std::string& key) { return detail::setters().count(key) > 0; }

inline void set_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto& t = detail::setters();
    const auto it = t.find(key);
    if (it == t.end()) {
        throw ConfigError("unknown configuration key '" + key + "'");
    }
    it->second(cfg, trim(value));
}

/// Applies "key=value".
inline void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("override must look like key=value: '" + assignment + "'");
    }
    set_value(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

/// Parses "key = value" lines with '#' comments into ordered pairs.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        }
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

inline void apply_stream(RunConfig& cfg, std::istream& in) {
    for (const auto& [k, v] : parse_key_values(in)) {
        set_value(cfg, k, v);
    }
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    return in;
}

inline RunConfig load_config(const std::string& path) {
    RunConfig cfg;
    auto in = open_input(path);
    apply_stream(cfg, in);
    return cfg;
}

}  // namespace cvqkd
