#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "cvqkd/channel.hpp"
#include "cvqkd/estimation.hpp"
#include "holevo_oracle.hpp"

using namespace cvqkd;

namespace {

/// Forward model: X_B = sqrt(eta T / 2) X_A + N(0, 1 + V_en + eta T xi / 2), both quadratures.
struct SyntheticPair {
    SymbolBlock a;
    SymbolBlock b;
};

SyntheticPair forward_model(std::size_t n, double v_mod, double t, double eta, double xi, double v_en,
                            std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> na(0.0, std::sqrt(v_mod));
    std::normal_distribution<double> nn(0.0, std::sqrt(1.0 + v_en + 0.5 * eta * t * xi));
    const double g = std::sqrt(0.5 * eta * t);
    SyntheticPair s;
    s.a.symbol_rate = s.b.symbol_rate = 1e8;
    s.a.x.resize(n);
    s.a.p.resize(n);
    s.b.x.resize(n);
    s.b.p.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        s.a.x[k] = na(rng);
        s.a.p[k] = na(rng);
        s.b.x[k] = g * s.a.x[k] + nn(rng);
        s.b.p[k] = g * s.a.p[k] + nn(rng);
    }
    return s;
}

}  // namespace

TEST(Estimators, DirectTranscription) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.01, 3.0);
    for (int i = 0; i < 1000; ++i) {
        const double c = u(rng), v = u(rng), eta = std::min(1.0, u(rng)), vba = u(rng), t = u(rng), ven = u(rng);
        EXPECT_NEAR(transmittance_from_cab(c, v, eta), (2.0 / eta) * (c / v) * (c / v),
                    1e-12 * transmittance_from_cab(c, v, eta));
        EXPECT_NEAR(excess_noise_from_vba(vba, t, eta, ven), 2.0 * (vba - 1.0 - ven) / (eta * t),
                    1e-12 * std::abs(2.0 * (vba - 1.0 - ven) / (eta * t)) + 1e-15);
    }
}

TEST(Estimators, IdentityChannelTransmittance) {
    const auto s = forward_model(1000000, 2.5, 1.0, 1.0, 0.0, 0.0, 2);
    EXPECT_NEAR(estimate_transmittance(s.a, s.b, 2.5, 1.0), 1.0, 0.02);
}

TEST(Estimators, UncorrelatedDataFails) {
    auto s = forward_model(10000, 2.5, 1.0, 1.0, 0.0, 0.0, 3);
    for (double& v : s.a.x) v = -v;
    for (double& v : s.a.p) v = -v;
    EXPECT_THROW(estimate_transmittance(s.a, s.b, 2.5, 1.0), ChannelEstimationError);
}

TEST(Estimators, ConditionalVarianceAtShotPlusElectronicGivesZero) {
    EXPECT_NEAR(excess_noise_from_vba(1.0 + 0.1, 0.3, 0.7, 0.1), 0.0, 1e-14);
}

TEST(Estimators, RecoversInjectedExcessNoiseTenMillionSymbols) {
    const double v = 2.5, t = 0.025, eta = 0.7, xi = 0.01, ven = 0.1;
    const std::size_t n = 10000000;
    const auto s = forward_model(n, v, t, eta, xi, ven, 4);
    const double t_est = estimate_transmittance(s.a, s.b, v, eta);
    const double xi_est = estimate_excess_noise(s.a, s.b, t_est, eta, ven);
    // Standard error of xi from the conditional-variance and transmittance estimates.
    const double noise = 1.0 + ven + 0.5 * eta * t * xi;
    const double se_v = noise * std::sqrt(2.0 / (2.0 * static_cast<double>(n)));
    const double se_c = std::sqrt(v * noise / (2.0 * static_cast<double>(n)));
    const double se_xi = 2.0 / (eta * t) * std::hypot(se_v, 2.0 * se_c * std::sqrt(0.5 * eta * t));
    EXPECT_NEAR(xi_est, xi, 4.0 * se_xi);
    EXPECT_NEAR(t_est / t, 1.0, 0.02);
}

TEST(Estimators, UnbiasedOverTrials) {
    for (double xi : {0.0, 0.005, 0.02, 0.1}) {
        const double v = 2.5, t = 0.5, eta = 0.7, ven = 0.1;
        std::vector<double> est;
        for (int trial = 0; trial < 100; ++trial) {
            const auto s = forward_model(100000, v, t, eta, xi, ven, 1000 + static_cast<std::uint64_t>(trial));
            const double t_est = estimate_transmittance(s.a, s.b, v, eta);
            est.push_back(estimate_excess_noise(s.a, s.b, t_est, eta, ven));
        }
        double m = 0.0, ss = 0.0;
        for (double e : est) m += e;
        m /= static_cast<double>(est.size());
        for (double e : est) ss += (e - m) * (e - m);
        const double se = std::sqrt(ss / (static_cast<double>(est.size()) - 1.0) / static_cast<double>(est.size()));
        EXPECT_NEAR(m, xi, 2.0 * se) << "xi=" << xi;
    }
}

TEST(Information, MutualInformationExamples) {
    EXPECT_DOUBLE_EQ(mutual_information(0.0, 0.5, 0.7, 0.01, 0.1), 0.0);
    // SNR = 1: 0.5 eta T V = 1 + V_en + 0.5 eta T xi.
    EXPECT_NEAR(mutual_information(2.0, 1.0, 1.0, 0.0, 0.0), 1.0, 1e-15);
    EXPECT_NEAR(mutual_information(2.5, 1.0, 1.0, 0.0, 0.0), std::log2(2.25), 1e-15);
    EXPECT_NEAR(mutual_information(2.5, 1.0, 1.0, 0.0, 0.0), 1.1699, 1e-4);
}

TEST(Information, HolevoZeroCases) {
    EXPECT_NEAR(holevo_bound(2.5, 1.0, 1.0, 0.0, 0.0), 0.0, 1e-9);
    EXPECT_LT(holevo_bound(1e-9, 0.3, 0.7, 0.0, 0.1), 1e-6);
    // With excess noise the purification still holds that noise even without modulation.
    EXPECT_NEAR(holevo_bound(1e-9, 0.3, 0.7, 0.01, 0.1), oracle::holevo(1e-9, 0.3, 0.7, 0.01, 0.1), 1e-9);
}

TEST(Information, HolevoMatchesCovarianceOracleAtHundredKm) {
    const double t = std::pow(10.0, -1.6);
    const double ours = holevo_bound(2.5, t, 0.7, 0.005, 0.1);
    const double ref = oracle::holevo(2.5, t, 0.7, 0.005, 0.1);
    EXPECT_NEAR(ours / ref, 1.0, 1e-9);
}

TEST(Information, HolevoNonNegativeAndIncreasingInXi) {
    for (double t : {0.01, 0.1, 0.6}) {
        double prev = -1.0;
        for (double xi : {0.0, 0.005, 0.01, 0.05, 0.1}) {
            const double chi = holevo_bound(2.5, t, 0.7, xi, 0.1);
            EXPECT_GE(chi, 0.0);
            EXPECT_GT(chi, prev);
            prev = chi;
        }
    }
}

TEST(Information, UnphysicalInputRaises) {
    EXPECT_THROW(holevo_eigenvalues(2.5, 0.9, 0.7, -0.5, 0.1), PhysicalityError);
}

TEST(KeyRateFormula, Examples) {
    EXPECT_DOUBLE_EQ(secret_key_rate(1.0, 0.95, 0.95, 1e8).clamped, 0.0);
    EXPECT_NEAR(secret_key_rate(1.0, 0.0, 0.95, 1e8).clamped, 2.375e7, 1e-6);
    const KeyRate neg = secret_key_rate(0.5, 0.9, 0.95, 1e8);
    EXPECT_EQ(neg.clamped, 0.0);
    EXPECT_LT(neg.raw, 0.0);
    EXPECT_THROW(secret_key_rate(1.0, 0.0, 0.0, 1e8), ParameterError);
}

TEST(KeyRateFormula, NonIncreasingInExcessNoiseAndDistance) {
    const auto skr = [](double t, double xi) {
        const double i = mutual_information(2.5, t, 0.7, xi, 0.1);
        return secret_key_rate(i, holevo_bound(2.5, t, 0.7, xi, 0.1), 0.95, 1e8).clamped;
    };
    double prev = 1e300;
    for (double xi : {0.0, 0.002, 0.005, 0.01, 0.02, 0.05}) {
        const double r = skr(0.1, xi);
        EXPECT_LE(r, prev);
        prev = r;
    }
    prev = 1e300;
    for (double d : {0.0, 10.0, 25.0, 50.0, 75.0, 100.0, 150.0}) {
        ChannelSpec c;
        c.distance_km = d;
        const double r = skr(fiber_transmittance(c), 0.005);
        EXPECT_LE(r, prev);
        prev = r;
    }
}

namespace {

EnsembleInputs synthetic_ensemble(std::size_t k, std::size_t n, double t, double xi, std::uint64_t seed) {
    EnsembleInputs in;
    for (std::size_t c = 0; c < k; ++c) {
        const auto s = forward_model(n, 2.5, t, 0.7, xi, 0.1, seed + c);
        in.copies.push_back(accumulate(s.a, s.b));
        in.v_en.push_back(0.1);
    }
    return in;
}

}  // namespace

TEST(Ensemble, MomentsAveragedBeforeFormulas) {
    EnsembleInputs in = synthetic_ensemble(2, 20000, 0.3, 0.02, 50);
    const auto extra = forward_model(20000, 2.5, 0.6, 0.7, 0.02, 0.1, 60);
    in.copies.push_back(accumulate(extra.a, extra.b));
    in.v_en.push_back(0.1);
    double c = 0.0, va = 0.0, vb = 0.0;
    for (const auto& m : in.copies) {
        c += m.c_ab() / 3.0;
        va += m.var_a() / 3.0;
        vb += m.var_b() / 3.0;
    }
    const double t = transmittance_from_cab(c, 2.5, 0.7);
    const double g = std::sqrt(0.35 * t);
    const double xi = excess_noise_from_vba(vb - 2.0 * g * c + g * g * va, t, 0.7, 0.1);
    const EstimationResult r = estimate_ensemble(in, 2.5, 0.7, 0.95, 1e8);
    EXPECT_NEAR(r.t_ch, t, 1e-12 * t);
    EXPECT_NEAR(r.xi_a, xi, 1e-12 * std::abs(xi) + 1e-15);
    EXPECT_EQ(r.n_copies, 3u);
    EXPECT_EQ(r.n_symbols_used, 20000u);
}

TEST(Ensemble, MergeOrderInsensitive) {
    const EnsembleInputs in = synthetic_ensemble(12, 5000, 0.4, 0.01, 70);
    CopyMoments forward;
    for (const auto& m : in.copies) forward.merge(m);
    std::vector<std::size_t> order(in.copies.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(order.begin(), order.end(), rng);
        CopyMoments shuffled;
        for (std::size_t i : order) shuffled.merge(in.copies[i]);
        EXPECT_NEAR(shuffled.c_ab(), forward.c_ab(), 1e-12 * std::abs(forward.c_ab()));
        EXPECT_NEAR(shuffled.var_b(), forward.var_b(), 1e-12 * forward.var_b());
        // Tree-shaped merge.
        CopyMoments left, right;
        for (std::size_t j = 0; j < order.size(); ++j) (j % 2 ? left : right).merge(in.copies[order[j]]);
        left.merge(right);
        EXPECT_NEAR(left.conditional_variance(0.3), forward.conditional_variance(0.3),
                    1e-12 * forward.conditional_variance(0.3));
    }
}

TEST(Ensemble, JackknifeFloorScalesWithSymbols) {
    const double small = estimate_ensemble(synthetic_ensemble(20, 5000, 0.2, 0.0, 100), 2.5, 0.7, 0.95, 1e8).xi_floor;
    const double large = estimate_ensemble(synthetic_ensemble(20, 50000, 0.2, 0.0, 200), 2.5, 0.7, 0.95, 1e8).xi_floor;
    EXPECT_GT(small / large, 2.0);
    EXPECT_LT(small / large, 5.0);
}

TEST(Ensemble, StatusFlags) {
    EnsembleInputs in = synthetic_ensemble(3, 20000, 1.0, 0.0, 300);
    const EstimationResult r = estimate_ensemble(in, 2.3, 0.7, 0.95, 1e8);
    EXPECT_GT(r.t_ch, 1.0);
    EXPECT_EQ(r.status, "t_ch_above_one");
}

TEST(Ensemble, EstimationHalfTakesEvenSymbols) {
    SymbolBlock b{{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}, 1.0};
    const SymbolBlock h = estimation_half(b);
    EXPECT_EQ(h.x, (std::vector<double>{0, 2, 4}));
    EXPECT_EQ(h.p, (std::vector<double>{5, 7, 9}));
}
