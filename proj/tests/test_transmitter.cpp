#include <gtest/gtest.h>

#include <random>

#include "cvqkd/transmitter.hpp"
#include "modulator_oracle.hpp"

using namespace cvqkd;

namespace {

SymbolBlock zero_symbols(std::size_t n, double rs = 100e6) {
    SymbolBlock s;
    s.symbol_rate = rs;
    s.x.assign(n, 0.0);
    s.p.assign(n, 0.0);
    return s;
}

IqModulatorSpec spec_at(double bias, double er_db) {
    IqModulatorSpec m;
    m.bias = bias;
    m.extinction_ratio_db = er_db;
    return m;
}

}  // namespace

TEST(Symbols, MillionSymbolVariance) {
    const SymbolBlock s = generate_gaussian_symbols(1000000, 2.5, 42, 1e8);
    double vx = 0.0, vp = 0.0, mx = 0.0, mp = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        mx += s.x[k];
        mp += s.p[k];
        vx += s.x[k] * s.x[k];
        vp += s.p[k] * s.p[k];
    }
    const double n = static_cast<double>(s.size());
    EXPECT_NEAR((vx + vp) / n, 2.5, 0.025);
    // Means within 5 standard errors of zero.
    EXPECT_LT(std::abs(mx / n), 5.0 * std::sqrt(1.25 / n));
    EXPECT_LT(std::abs(mp / n), 5.0 * std::sqrt(1.25 / n));
    EXPECT_LT(std::abs(vx / n - 1.25), 5.0 * 1.25 * std::sqrt(2.0 / n));
}

TEST(Symbols, SameSeedSameSequence) {
    const auto a = generate_gaussian_symbols(1000, 2.0, 7);
    const auto b = generate_gaussian_symbols(1000, 2.0, 7);
    const auto c = generate_gaussian_symbols(1000, 2.0, 8);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.p, b.p);
    EXPECT_NE(a.x, c.x);
}

TEST(Symbols, ZeroVarianceRejected) {
    EXPECT_THROW(generate_gaussian_symbols(10, 0.0, 1), ParameterError);
    EXPECT_THROW(generate_gaussian_symbols(0, 1.0, 1), ParameterError);
}

TEST(Modulator, GammaFromExtinctionRatio) {
    EXPECT_NEAR(extinction_gamma(35.0), 0.9651, 5e-5);
    EXPECT_GT(extinction_gamma(0.1), 0.0);
    EXPECT_LT(extinction_gamma(80.0), 1.0);
}

TEST(Modulator, MatchesExpressionOracle) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 10000; ++i) {
        const double v1 = u(rng), v2 = u(rng), vb = u(rng);
        IqModulatorSpec m = spec_at(vb, 35.0);
        const cplx ours = modulator_response(v1, v2, m);
        const cplx ref = oracle::iq_field(v1, v2, vb, m.v_pi, 35.0);
        ASSERT_LE(std::abs(ours - ref), 1e-12) << v1 << " " << v2 << " " << vb;
    }
}

TEST(Modulator, NullPointLeakage) {
    const IqModulatorSpec m = spec_at(1.0, 35.0);
    const double g = m.gamma();
    EXPECT_NEAR(std::abs(modulator_response(0.0, 0.0, m)), (1.0 - g) / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(std::abs(modulator_response(0.0, 0.0, m)), 0.0247, 1e-4);
}

TEST(Modulator, QuadraturePointHalfPowerPerQuadrature) {
    const IqModulatorSpec m = spec_at(0.5, 200.0);
    EXPECT_NEAR(std::norm(arm_field(0.0, m.bias, m.v_pi, m.gamma())), 0.5, 1e-9);
}

TEST(Modulator, MaximumTransmissionPerQuadratureUnity) {
    const IqModulatorSpec m = spec_at(0.0, 200.0);
    EXPECT_NEAR(std::norm(arm_field(0.0, m.bias, m.v_pi, m.gamma())), 1.0, 1e-9);
}

TEST(Modulator, NullLeakageVanishesAsGammaToOne) {
    double prev = 1.0;
    for (double er : {20.0, 40.0, 60.0, 100.0, 200.0}) {
        const double a = std::abs(modulator_response(0.0, 0.0, spec_at(1.0, er)));
        EXPECT_LT(a, prev);
        prev = a;
    }
    EXPECT_LT(prev, 1e-9);
}

TEST(Modulator, OutputBoundedByTwoArmSum) {
    // |E_out| <= sqrt(1 + gamma^2) |E_in|; the maximum is attained with one arm at its
    // extinction-limited extreme and the other at full transmission.
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (double er : {10.0, 35.0, 60.0}) {
        const IqModulatorSpec m = spec_at(0.3, er);
        const double bound = std::sqrt(1.0 + m.gamma() * m.gamma());
        double worst = 0.0;
        for (int i = 0; i < 20000; ++i) {
            worst = std::max(worst, std::abs(modulator_response(u(rng), u(rng), m)));
        }
        EXPECT_LE(worst, bound * (1.0 + 1e-12));
        EXPECT_GT(worst, 0.99 * bound);
    }
}

TEST(Modulator, SmallSignalCheckCosSquaredLaw) {
    const SmallSignalReport r = small_signal_check(spec_at(1.0, 60.0));
    EXPECT_TRUE(r.pass);
    EXPECT_LT(r.max_abs_error, 0.01);
    EXPECT_NEAR(r.measured.front(), 1.0, 0.01);
    EXPECT_NEAR(r.measured[r.measured.size() / 4], 0.5, 0.01);
    EXPECT_NEAR(r.measured[r.measured.size() / 2], 0.0, 0.01);
    for (std::size_t i = 0; i < r.bias.size(); ++i) {
        if (r.expected[i] > 0.05) {
            EXPECT_NEAR(r.measured[i] / r.expected[i], 1.0, 0.01);
        }
    }
    EXPECT_THROW(small_signal_check(spec_at(1.0, 20.0)), ParameterError);
}

TEST(Modulator, LengthMismatchRejected) {
    RealWaveform a(10, 1.0), b(11, 1.0);
    EXPECT_THROW(iq_modulate(a, b, spec_at(1.0, 35.0), LaserSpec{}), ParameterError);
}

TEST(TxDsp, OpticalPilotZeroSymbolsGivesZeroDrive) {
    PilotMode p{PilotKind::optical, 0.0, 400e6};
    const auto d = tx_dsp(zero_symbols(64), p, design_rrc(0.65, 20, 20), 2e9, 34.0, 2.0);
    for (std::size_t k = 0; k < d.v_rf1.size(); ++k) {
        ASSERT_EQ(d.v_rf1[k], 0.0);
        ASSERT_EQ(d.v_rf2[k], 0.0);
    }
}

TEST(TxDsp, ElectricalPilotZeroSymbolsIsUnitRatioTone) {
    PilotMode p{PilotKind::electrical, 100e6, 500e6};
    const auto d = tx_dsp(zero_symbols(64), p, design_rrc(0.65, 20, 20), 2e9, 0.0, 2.0);
    for (std::size_t k = 0; k < d.v_rf1.size(); ++k) {
        const cplx s(d.v_rf1[k], d.v_rf2[k]);
        ASSERT_NEAR(std::abs(s) / d.sigma_s, 1.0, 1e-12);
        const cplx ref = d.sigma_s * std::polar(1.0, kTwoPi * 100e6 * static_cast<double>(k) / 2e9);
        ASSERT_LT(std::abs(s - ref), 1e-12);
    }
}

TEST(TxDsp, ElectricalPilotRatioByPsdIntegration) {
    PilotMode p{PilotKind::electrical, 100e6, 500e6};
    const SymbolBlock s = generate_gaussian_symbols(100000, 2.0, 3, 100e6);
    const auto d = tx_dsp(s, p, design_rrc(0.65, 20, 20), 2e9, 34.0, 2.0);
    ComplexWaveform w(d.v_rf1.size(), 2e9);
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = {d.v_rf1[k], d.v_rf2[k]};
    const Spectrum sp = estimate_psd(w, 32768);
    const double pilot = sp.band_power(99e6, 101e6);
    const double quantum = sp.band_power(500e6 - 82.5e6, 500e6 + 82.5e6);
    EXPECT_NEAR(pilot / quantum / db_to_linear(34.0), 1.0, 0.02);
}

TEST(TxDsp, BandOverlapRejected) {
    PilotMode p{PilotKind::electrical, 450e6, 500e6};
    EXPECT_THROW(tx_dsp(zero_symbols(64), p, design_rrc(0.65, 20, 20), 2e9, 34.0, 2.0), ConfigError);
}

TEST(Voa, PowerFromPhotonNumber) {
    ComplexWaveform f(std::vector<cplx>(100, cplx(3.0, 1.0)), 2e9);
    const double e_ph = kPlanck * kSpeedOfLight / 1550e-9;
    const VoaOutput out = apply_voa_and_meter(f, 1.25, 1.0, 1e8, 1550e-9);
    EXPECT_NEAR(out.p_pom / (1.25 * 2.0 * e_ph * 1e8), 1.0, 1e-12);
    EXPECT_NEAR(mean_power(out.field), out.p_pom, 1e-12 * out.p_pom);
    const VoaOutput twice = apply_voa_and_meter(f, 2.5, 1.0, 1e8, 1550e-9);
    EXPECT_NEAR(twice.p_pom / out.p_pom, 2.0, 1e-12);
}

TEST(Voa, InvalidInputsRejected) {
    ComplexWaveform f(std::vector<cplx>(10, cplx(1.0, 0.0)), 2e9);
    EXPECT_THROW(apply_voa_and_meter(f, 0.0, 1.0, 1e8, 1550e-9), ParameterError);
    ComplexWaveform dark(10, 2e9);
    EXPECT_THROW(apply_voa_and_meter(dark, 1.0, 1.0, 1e8, 1550e-9), DegenerateInputError);
}

TEST(Vmod, CalibrationInvertsMeter) {
    const double e_ph = photon_energy(1550e-9);
    for (double rho : {0.0, 1.0, 2511.9}) {
        const double p = 1.25 * (1.0 + rho) * e_ph * 1e8;
        EXPECT_NEAR(calibrate_vmod(p, rho, e_ph, 1e8), 2.5, 1e-12);
    }
    EXPECT_LT(calibrate_vmod(1e-9, 1e30, e_ph, 1e8), 1e-15);
    EXPECT_THROW(calibrate_vmod(0.0, 1.0, e_ph, 1e8), ParameterError);
}

namespace {

TransmitterConfig tx_config(PilotKind kind, int n_dac) {
    TransmitterConfig c;
    c.pilot.kind = kind;
    c.pilot.f_pilot = 100e6;
    c.pilot.f_uc = kind == PilotKind::electrical ? 500e6 : 400e6;
    c.n_dac = n_dac;
    return c;
}

}  // namespace

TEST(Transmit, ElectricalPilotRatioNearConfiguredAtHighResolution) {
    const auto rrc = design_rrc(0.65, 20, 20);
    const SymbolBlock s = generate_gaussian_symbols(20000, 2.0, 9, 100e6);
    const TransmitterOutput out = transmit(tx_config(PilotKind::electrical, 0), s, rrc);
    EXPECT_NEAR(linear_to_db(out.rho_measured), 34.0, 0.2);
}

TEST(Transmit, OpticalPilotZeroDriveIsPureCarrier) {
    const auto rrc = design_rrc(0.65, 20, 20);
    const TransmitterOutput out = transmit(tx_config(PilotKind::optical, 12), zero_symbols(4096), rrc);
    const Spectrum sp = estimate_psd(out.field, 8192);
    const double total = sp.band_power(-1e10, 1e10);
    const double carrier = sp.band_power(-2.0 * sp.resolution, 2.0 * sp.resolution);
    EXPECT_GT(carrier / total, 1.0 - 1e-9);
}

TEST(Transmit, VmodFollowsMeteredPower) {
    const auto rrc = design_rrc(0.65, 20, 20);
    const SymbolBlock s = generate_gaussian_symbols(20000, 2.0, 10, 100e6);
    for (PilotKind k : {PilotKind::electrical, PilotKind::optical}) {
        const TransmitterOutput out = transmit(tx_config(k, 0), s, rrc);
        EXPECT_NEAR(out.v_mod,
                    calibrate_vmod(out.p_pom, out.rho_measured, photon_energy(1550e-9), 100e6), 1e-12);
        EXPECT_NEAR(out.v_mod, 2.5, 0.15);
    }
}
