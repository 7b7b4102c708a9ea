#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ndpa/fluctuation.hpp"
#include "ndpa/steady_state.hpp"
#include "oracles/oracles.hpp"

using namespace ndpa;

namespace {

constexpr double kPi = std::numbers::pi;

SystemConfig matched(double pump_ratio = 1e3) { return reference_system(1.0, 1e3, {}, pump_ratio); }

// Unequal masses and a non-unit bath so normalization is exercised.
SystemConfig uneven() {
    auto p = modes_from_asymmetry(1.0, 1e3, {0.31, 0.09}, 2.0, 0.5);
    return make_system(p.mode_i, p.mode_j, 1.31e3, 7.0, 0.3, 5.0, 1.0);
}

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

/// Oracle linearization about the library fixed point, gauge fixed so both
/// membrane phases sit at pi/2.
oracle::Linear oracle_full(const SystemConfig& s, double mu) {
    const auto st = solve_steady_state(s, {mu, 0.0, 0.0});
    std::array<std::complex<double>, 3> a{st.a_i, st.a_j, st.a_s};
    if (mu > 1.0) {
        const auto root = oracle::newton_steady_state(s, mu, 0.0, {1.1 * st.a_i, 0.9 * st.a_j, st.a_s});
        const double theta = std::arg(root.a[0]) - 0.5 * kPi;
        a = {root.a[0] * std::polar(1.0, -theta), root.a[1] * std::polar(1.0, theta), root.a[2]};
    }
    return oracle::linearize_full(s, mu, a);
}

}  // namespace

TEST(BuildBelow, UncoupledLimit) {
    const auto s = uneven();
    const auto fm = build_below(s, {0.0, 0.0, 0.0});
    const Eigen::Vector3d g(s.mode_i.gamma, s.mode_j.gamma, s.mode_s.gamma);
    EXPECT_LT(max_abs_diff(fm.m_alpha(), Eigen::Matrix3d(-0.5 * g.asDiagonal())), 1e-14);
    EXPECT_LT(max_abs_diff(fm.m_beta(), Eigen::Matrix3d(-0.5 * g.asDiagonal())), 1e-14);
}

TEST(BuildBelow, MatchedDriftBlock) {
    const auto fm = build_below(matched(), {0.5, 0.0, 0.0});
    Eigen::Matrix2d expect;
    expect << 1.0, 0.5, 0.5, 1.0;
    EXPECT_LT(max_abs_diff(fm.m_alpha().topLeftCorner(2, 2), -0.5 * expect), 1e-14);
}

TEST(BuildBelow, SectorEigenvalues) {
    const double mu = 0.6;
    const auto mc = build_below(matched(), {mu, 0.0, 0.0}).collective_drift();
    const auto idx = [](const char* l) { return l[0] == 'x' ? (l[1] == '+' ? 0 : 1) : (l[1] == '+' ? 3 : 4); };
    EXPECT_NEAR(mc(idx("x+"), idx("x+")), -0.5 * (1.0 + mu), 1e-14);
    EXPECT_NEAR(mc(idx("x-"), idx("x-")), -0.5 * (1.0 - mu), 1e-14);
    EXPECT_NEAR(mc(idx("y+"), idx("y+")), -0.5 * (1.0 - mu), 1e-14);
    EXPECT_NEAR(mc(idx("y-"), idx("y-")), -0.5 * (1.0 + mu), 1e-14);
}

TEST(BuildBelow, DriftMatchesOracleJacobian) {
    for (double mu : {0.0, 0.4, 0.9, 1.0}) {
        const auto s = uneven();
        const auto fm = build_below(s, {mu, 0.0, 0.0});
        const auto lin = oracle_full(s, mu);
        EXPECT_LT(max_abs_diff(fm.drift, lin.drift), 1e-9 * s.mode_s.gamma) << mu;
        EXPECT_LT(max_abs_diff(fm.diffusion, lin.diffusion), 1e-12 * s.mode_s.gamma);
    }
}

TEST(BuildBelow, Errors) {
    EXPECT_THROW((void)build_below(matched(), {1.01, 0.0, 0.0}), Error);
    try {
        (void)build_below(matched(), {1.5, 0.0, 0.0});
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::AboveThreshold);
    }
}

TEST(BuildAbove, DriftMatchesOracleJacobian) {
    const auto s = uneven();
    for (double mu : {1.3, 2.0, 4.0}) {
        const auto fm = build_above(s, {mu, 0.0, 0.0}, false);
        const auto lin = oracle_full(s, mu);
        EXPECT_LT(max_abs_diff(fm.drift, lin.drift), 1e-8 * s.mode_s.gamma) << mu;
    }
}

TEST(BuildAbove, PhaseDifferenceIsFree) {
    const auto fm = build_above(matched(), {2.0, 0.0, 0.0}, true);
    const auto ev = drift_eigenvalues(fm);
    double smallest = 1.0;
    for (Eigen::Index k = 0; k < ev.size(); ++k) smallest = std::min(smallest, std::abs(ev(k)));
    EXPECT_LT(smallest, 1e-12);
    EXPECT_NEAR(fm.collective_drift()(1, 1), 0.0, 1e-12);
}

TEST(BuildAbove, SqueezedDifferenceSpectrumIndependentOfDrive) {
    for (double mu : {1.5, 2.0, 6.0}) {
        const auto fm = sector(build_above(matched(), {mu, 0.0, 0.0}, true), {"y+", "y-"});
        const Eigen::Index y = *fm.index_of("y-");
        for (double w : {0.0, 0.3, 1.0, 5.0}) {
            const double s = spectral_density(fm, w)(y, y).real();
            EXPECT_NEAR(s, 1.0 / (2.0 * kPi * (1.0 + w * w)), 1e-12) << mu << " " << w;
        }
    }
}

TEST(BuildAbove, FullAndEliminatedAgreeForFastPump) {
    const auto s = reference_system(1.0, 1e6, {0.31, 0.09}, 1e4);
    for (double mu : {1.5, 3.0}) {
        const auto full = variance_integral(build_above(s, {mu, 0.0, 0.0}, false));
        const auto elim = variance_integral(build_above(s, {mu, 0.0, 0.0}, true));
        for (const char* q : {"y+", "y-"}) EXPECT_NEAR(full.var(q) / elim.var(q), 1.0, 0.01) << q;
    }
}

TEST(BuildAbove, Errors) {
    EXPECT_THROW((void)build_above(matched(), {1.0, 0.0, 0.0}, true), Error);
    try {
        (void)build_above(matched(50.0), {2.0, 0.0, 0.0}, true);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EliminationGuardViolated);
    }
    EXPECT_NO_THROW((void)build_above(matched(50.0), {2.0, 0.0, 0.0}, false));
    try {
        (void)build_above(matched(), {2.0, 0.0, 0.1}, false);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DetunedAboveThreshold);
    }
}

TEST(BuildDetuned, ZeroDetuningIsBlockDiagonal) {
    const auto fm = build_detuned(matched(), {0.5, 0.0, 0.0});
    EXPECT_EQ(fm.drift.topRightCorner(2, 2).cwiseAbs().maxCoeff(), 0.0);
    const auto below = build_below(matched(), {0.5, 0.0, 0.0});
    EXPECT_LT(max_abs_diff(fm.m_alpha(), below.m_alpha().topLeftCorner(2, 2)), 1e-15);
}

TEST(BuildDetuned, StableAtUnitDriveWhenDetunedByGamma) {
    const auto ev = drift_eigenvalues(build_detuned(matched(), {1.0, 0.0, 1.0}));
    EXPECT_LT(ev.real().maxCoeff(), 0.0);
}

TEST(BuildDetuned, DriftMatchesOracle) {
    const auto s = uneven();
    const auto fm = build_detuned(s, {0.7, 0.0, 0.4});
    EXPECT_LT(max_abs_diff(fm.drift, oracle::linearize_detuned(s, 0.7, 0.4).drift), 1e-12);
}

TEST(BuildDetuned, Errors) {
    try {
        (void)build_detuned(matched(), {1.5, 0.0, 1.0});
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::AboveThreshold);
    }
    try {
        (void)build_detuned(matched(), {0.5, 0.0, 200.0});
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::PumpDetuningTooLarge);
    }
}

TEST(BuildDetuned, CrossCorrelationLinearInDetuning) {
    const auto a = variance_lyapunov(build_detuned(matched(), {0.5, 0.0, 1e-3})).at("x+", "y+");
    const auto b = variance_lyapunov(build_detuned(matched(), {0.5, 0.0, 2e-3})).at("x+", "y+");
    EXPECT_NE(a, 0.0);
    EXPECT_NEAR(b / a, 2.0, 1e-5);
}

TEST(StabilityBoundary, MatchedDetuned) {
    EXPECT_NEAR(stability_boundary(matched(), 0.0), 1.0, 1e-9);
    EXPECT_NEAR(stability_boundary(matched(), 1.0), std::sqrt(2.0), 1e-9);
    EXPECT_NEAR(stability_boundary(matched(), 2.0), std::sqrt(5.0), 1e-9);
}

TEST(StabilityBoundary, DenseScanOracleBracketsBisection) {
    const auto s = matched();
    for (double delta : {0.5, 1.0}) {
        double first_unstable = 0.0;
        for (double mu = 0.0; mu < 3.0; mu += 1e-4) {
            if (oracle::max_real_eig(oracle::linearize_detuned(s, mu, delta).drift) >= 0.0) {
                first_unstable = mu;
                break;
            }
        }
        const double b = stability_boundary(s, delta);
        EXPECT_LE(b, first_unstable + 1e-12);
        EXPECT_GT(b, first_unstable - 1e-4 - 1e-12);
    }
}

TEST(Spectrum, MatchedBelowZeroFrequency) {
    const double mu = 0.5;
    const auto fm = build_below(matched(), {mu, 0.0, 0.0});
    const double s = spectral_density(fm, 0.0)(0, 0).real();
    EXPECT_NEAR(s, (2.0 / kPi) / ((1.0 + mu) * (1.0 + mu)), 1e-14);
}

TEST(Spectrum, UncoupledLorentzians) {
    const auto s = uneven();
    const auto fm = build_below(s, {0.0, 0.0, 0.0});
    const double w = 0.37;
    const auto raw = spectral_density_raw(fm, w);
    const double g[3] = {s.mode_i.gamma, s.mode_j.gamma, s.mode_s.gamma};
    for (int k = 0; k < 3; ++k) {
        const double h = 0.5 * g[k];
        EXPECT_NEAR(raw(k, k).real(), g[k] / (2.0 * kPi * (h * h + w * w)), 1e-12);
    }
}

TEST(Spectrum, HermitianPositive) {
    const auto fm = build_detuned(uneven(), {0.6, 0.0, 0.5});
    const auto sd = spectral_density(fm, 0.8);
    EXPECT_LT((sd - sd.adjoint()).cwiseAbs().maxCoeff(), 1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(sd);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-14);
}

TEST(Spectrum, SingularOnMarginalMode) {
    const auto fm = build_above(matched(), {2.0, 0.0, 0.0}, true);
    try {
        (void)spectral_density(fm, 0.0);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SingularAtFrequency);
    }
    EXPECT_NO_THROW((void)spectral_density(fm, 1e-3));
}

TEST(Spectrum, ZeroFrequencyRatio) {
    const auto s = matched();
    const double base = spectral_density(build_below(s, {0.0, 0.0, 0.0}), 0.0)(0, 0).real();
    for (double mu : {0.25, 0.5, 0.9}) {
        const double v = spectral_density(build_below(s, {mu, 0.0, 0.0}), 0.0)(0, 0).real();
        EXPECT_NEAR(v / base, 1.0 / ((1.0 + mu) * (1.0 + mu)), 1e-12);
    }
    const auto sec = sector(build_below(s, {1.0, 0.0, 0.0}), {"x+"});
    EXPECT_NEAR(spectral_density(sec, 0.0)(0, 0).real() / base, 0.25, 1e-12);
}

TEST(Sector, RejectsCoupledSelection) {
    const auto fm = build_detuned(matched(), {0.5, 0.0, 0.5});
    EXPECT_THROW((void)sector(fm, {"x+"}), Error);
    EXPECT_THROW((void)sector(fm, {"nope"}), Error);
    EXPECT_NO_THROW((void)sector(fm, {"x+", "y+"}));
}

TEST(Covariance, EquilibriumIsIdentity) {
    const auto rep = variance_lyapunov(build_below(uneven(), {0.0, 0.0, 0.0}));
    EXPECT_LT(max_abs_diff(rep.sigma, Eigen::MatrixXd::Identity(6, 6)), 1e-12);
}

TEST(Covariance, MatchedHalfDrive) {
    const auto rep = variance_lyapunov(build_below(matched(), {0.5, 0.0, 0.0}));
    EXPECT_NEAR(rep.var("x+"), 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(rep.var("x-"), 2.0, 1e-12);
}

TEST(Covariance, LyapunovMatchesEigenOracle) {
    for (double mu : {0.2, 0.8, 0.99}) {
        const auto s = uneven();
        const auto fm = build_below(s, {mu, 0.0, 0.0});
        const Eigen::MatrixXd ref = oracle::eigen_lyapunov(oracle_full(s, mu));
        const Eigen::MatrixXd raw = fm.rotation.transpose() * variance_lyapunov(fm).sigma * fm.rotation;
        EXPECT_LT(max_abs_diff(raw, ref), 1e-9 * ref.cwiseAbs().maxCoeff()) << mu;
    }
    const auto s = uneven();
    const auto fm = build_detuned(s, {0.6, 0.0, 0.7});
    const Eigen::MatrixXd raw = fm.rotation.transpose() * variance_lyapunov(fm).sigma * fm.rotation;
    EXPECT_LT(max_abs_diff(raw, oracle::eigen_lyapunov(oracle::linearize_detuned(s, 0.6, 0.7))), 1e-9);
}

TEST(Covariance, IntegralMatchesLyapunov) {
    const auto check = [](const FluctuationModel& fm) {
        const auto a = variance_integral(fm).sigma;
        const auto b = variance_lyapunov(fm).sigma;
        EXPECT_LT(max_abs_diff(a, b), 1e-9 * b.cwiseAbs().maxCoeff());
    };
    check(build_below(uneven(), {0.7, 0.0, 0.0}));
    check(build_below(matched(), {0.99, 0.0, 0.0}));
    check(build_detuned(uneven(), {0.5, 0.0, 1.2}));
    check(sector(build_above(matched(), {3.0, 0.0, 0.0}, true), {"y+", "y-"}));
}

TEST(Covariance, IntegralMatchesBruteForce) {
    const auto s = uneven();
    const auto fm = build_below(s, {0.8, 0.0, 0.0});
    const auto lin = oracle_full(s, 0.8);
    const Eigen::MatrixXd raw_full = fm.rotation.transpose() * variance_integral(fm).sigma * fm.rotation;
    const Eigen::MatrixXd brute = oracle::brute_integral(lin, 0.0, 1e-6, 1e7);
    EXPECT_LT(max_abs_diff(raw_full, brute), 1e-8);
    const double tau = 20.0;
    const Eigen::MatrixXd raw_cut =
        fm.rotation.transpose() * variance_integral(fm, Band::measurement_time(tau)).sigma * fm.rotation;
    EXPECT_LT(max_abs_diff(raw_cut, oracle::brute_integral(lin, 2.0 * kPi / tau, 0.0, 1e7)), 1e-8);
}

TEST(Covariance, LongMeasurementRecoversSteadyState) {
    const auto fm = build_below(uneven(), {0.9, 0.0, 0.0});
    const auto a = variance_integral(fm, Band::measurement_time(1e9)).sigma;
    const auto b = variance_integral(fm).sigma;
    EXPECT_LT(max_abs_diff(a, b), 1e-6 * b.cwiseAbs().maxCoeff());
}

TEST(Covariance, TraceIsRotationInvariant) {
    const auto fm = build_below(uneven(), {0.6, 0.0, 0.0});
    const auto col = variance_lyapunov(fm).sigma;
    const Eigen::MatrixXd raw = fm.rotation.transpose() * col * fm.rotation;
    EXPECT_NEAR(col.trace(), raw.trace(), 1e-12 * col.trace());
}

TEST(Covariance, MarginalModesFlaggedNotThrown) {
    const auto at1 = variance_integral(build_below(matched(), {1.0, 0.0, 0.0}));
    EXPECT_TRUE(std::isinf(at1.var("x-")));
    EXPECT_TRUE(std::isinf(at1.var("y+")));
    EXPECT_FALSE(at1.divergent(0, 0));
    EXPECT_NEAR(at1.var("x+"), 0.5, 1e-9);
    const auto above = variance_integral(build_above(matched(), {2.0, 0.0, 0.0}, true));
    EXPECT_TRUE(std::isinf(above.var("x-")));
    EXPECT_NEAR(above.var("y+"), 1.0, 1e-9);
    EXPECT_NEAR(above.var("y-"), 0.5, 1e-9);
    try {
        (void)variance_lyapunov(build_above(matched(), {2.0, 0.0, 0.0}, true));
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MarginallyStable);
    }
}

TEST(Covariance, FiniteTimeMarginalMode) {
    const double tau = 300.0;
    const auto rep = variance_integral(build_below(matched(), {1.0, 0.0, 0.0}), Band::measurement_time(tau));
    EXPECT_NEAR(rep.var("x-"), tau / (2.0 * kPi * kPi), 1e-6 * tau / (2.0 * kPi * kPi));
    EXPECT_EQ(rep.method, CovarianceMethod::FiniteTime);
}
