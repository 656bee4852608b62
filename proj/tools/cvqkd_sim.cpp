// Command-line front end: run, sweep, psd, calibrate, selfcheck.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cvqkd/cvqkd.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kPhysicsError = 3, kIoError = 4 };

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool have_seed = false;
    std::size_t workers = 0;
    std::string out_path;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config_path, "key = value configuration file");
    cmd->add_option("--set", o.overrides, "override, key=value (repeatable)")->take_all();
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&o](const std::uint64_t& s) {
            o.seed = s;
            o.have_seed = true;
        },
        "master seed");
    cmd->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--out", o.out_path, "output file");
}

cvqkd::RunConfig build_config(const CommonOptions& o) {
    cvqkd::RunConfig cfg = o.config_path.empty() ? cvqkd::RunConfig{} : cvqkd::load_config(o.config_path);
    for (const auto& kv : o.overrides) {
        cvqkd::apply_override(cfg, kv);
    }
    if (o.have_seed) {
        cfg.master_seed = o.seed;
    }
    if (o.workers > 0) {
        cfg.n_workers = o.workers;
    }
    cfg.validate();
    return cfg;
}

void print_result(const cvqkd::RunOutput& out) {
    const auto& r = out.result;
    std::printf("v_mod       %.6g SNU\n", r.v_mod);
    std::printf("rho_meas    %.4f dB\n", cvqkd::linear_to_db(out.rho_measured));
    std::printf("t_ch        %.6g\n", r.t_ch);
    std::printf("v_en        %.6g SNU\n", r.v_en);
    std::printf("xi_a        %.4f mSNU\n", r.xi_a * 1e3);
    std::printf("xi_floor    %.4f mSNU\n", r.xi_floor * 1e3);
    std::printf("i_ab        %.6g bit/symbol\n", r.i_ab);
    std::printf("chi_be      %.6g bit/symbol\n", r.chi_be);
    std::printf("skr         %.6g bit/s\n", r.skr_bps);
    std::printf("skr_raw     %.6g bit/s\n", r.skr_raw);
    std::printf("symbols     %zu x %zu copies\n", r.n_symbols_used, r.n_copies);
    std::printf("status      %s\n", r.status.c_str());
}

int cmd_run(const CommonOptions& o) {
    const cvqkd::RunConfig cfg = build_config(o);
    const cvqkd::RunOutput out = cvqkd::run_single(cfg);
    print_result(out);
    if (!o.out_path.empty()) {
        std::ofstream csv(o.out_path);
        if (!csv) {
            throw cvqkd::IoError("cannot write '" + o.out_path + "'");
        }
        csv << cvqkd::kCsvHeader << '\n' << cvqkd::csv_row(std::nan(""), out.result) << '\n';
    }
    return kOk;
}

int cmd_sweep(const CommonOptions& o, const std::string& sweep_path) {
    auto in = cvqkd::open_input(sweep_path);
    const cvqkd::RunConfig base = o.config_path.empty() ? cvqkd::RunConfig{} : cvqkd::load_config(o.config_path);
    cvqkd::SweepSpec spec = cvqkd::parse_sweep(in, base);
    for (const auto& kv : o.overrides) {
        cvqkd::apply_override(spec.fixed, kv);
    }
    if (o.have_seed) {
        spec.fixed.master_seed = o.seed;
    }
    if (o.workers > 0) {
        spec.fixed.n_workers = o.workers;
    }
    if (!o.out_path.empty()) {
        spec.output_path = o.out_path;
    }
    std::printf("%s\n", cvqkd::kCsvHeader);
    cvqkd::run_sweep(spec, [](const cvqkd::SweepRow& row) {
        std::printf("%s\n", cvqkd::csv_row(row.axis_value, row.result).c_str());
        std::fflush(stdout);
    });
    return kOk;
}

int cmd_psd(const CommonOptions& o, const std::string& stage, bool zero_modulation) {
    const cvqkd::RunConfig cfg = build_config(o);
    const auto probe = stage == "rx" ? cvqkd::ProbePoint::rx_output : cvqkd::ProbePoint::tx_output;
    const cvqkd::Spectrum sp = cvqkd::export_psd(cfg, probe, zero_modulation);
    const std::string path = o.out_path.empty() ? "psd.csv" : o.out_path;
    cvqkd::write_psd_csv(path, sp);
    std::printf("wrote %zu bins to %s\n", sp.frequency.size(), path.c_str());
    return kOk;
}

int cmd_calibrate(const CommonOptions& o) {
    const cvqkd::RunConfig cfg = build_config(o);
    const cvqkd::DetectorSpec det = cfg.detector();
    const cvqkd::RunContext ctx = cvqkd::prepare_run(cfg);
    const auto& c = ctx.raw_calibration;
    std::printf("adc_full_scale          %.6g V\n", ctx.detector.adc_full_scale);
    std::printf("v_electronic            %.6g V^2\n", c.v_electronic);
    std::printf("v_shot_plus_electronic  %.6g V^2\n", c.v_shot_plus_electronic);
    std::printf("v_shot                  %.6g V^2\n", c.v_shot);
    std::printf("snu_scale               %.6g\n", c.snu_scale);
    std::printf("v_en                    %.6g SNU (model %.6g)\n", c.v_en(),
                det.electronic_variance(cfg.sample_rate) / det.shot_variance(cfg.sample_rate));
    return kOk;
}

int cmd_selfcheck() {
    int failed = 0;
    for (const auto& r : cvqkd::run_selfcheck()) {
        std::printf("%-34s %s  %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL", r.detail.c_str());
        failed += r.passed ? 0 : 1;
    }
    std::printf("%d failed\n", failed);
    return failed == 0 ? kOk : kPhysicsError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CV-QKD physical-layer simulator"};
    app.require_subcommand(1);

    CommonOptions run_opt, sweep_opt, psd_opt, cal_opt;
    std::string sweep_path, stage = "tx";
    bool zero_modulation = false;

    auto* run = app.add_subcommand("run", "single configuration, ensemble estimate");
    add_common(run, run_opt);
    auto* sweep = app.add_subcommand("sweep", "parameter sweep to CSV");
    add_common(sweep, sweep_opt);
    sweep->add_option("sweep_file", sweep_path, "sweep file")->required();
    auto* psd = app.add_subcommand("psd", "power spectral density at a probe point");
    add_common(psd, psd_opt);
    psd->add_option("--stage", stage, "tx or rx")->check(CLI::IsMember({"tx", "rx"}));
    psd->add_flag("--zero-modulation", zero_modulation, "transmit zero symbols");
    auto* cal = app.add_subcommand("calibrate", "shot and electronic noise calibration");
    add_common(cal, cal_opt);
    auto* check = app.add_subcommand("selfcheck", "built-in quick checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfigError;
    }

    try {
        if (*run) return cmd_run(run_opt);
        if (*sweep) return cmd_sweep(sweep_opt, sweep_path);
        if (*psd) return cmd_psd(psd_opt, stage, zero_modulation);
        if (*cal) return cmd_calibrate(cal_opt);
        if (*check) return cmd_selfcheck();
    } catch (const cvqkd::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const cvqkd::ParameterError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const cvqkd::IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kIoError;
    } catch (const cvqkd::PhysicsError& e) {
        std::fprintf(stderr, "physics error: %s\n", e.what());
        return kPhysicsError;
    }
    return kOk;
}
