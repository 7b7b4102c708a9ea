#pragma once

// Linearized fluctuation dynamics about a steady state.
//
// Every model is expressed in quadratures normalized by their own mode's
// thermal amplitude sqrt(k_B T / (m omega^2)), so the diffusion matrix of the
// bare noise is diag(gamma_k) and every variance is reported in units of the
// thermal variance. Raw ordering is (alpha_i, alpha_j, [alpha_S], beta_i,
// beta_j, [beta_S]); the collective ordering is (x+, x-, [xS], y+, y-, [yS])
// with x+- = (alpha_i +- alpha_j)/sqrt(2) and likewise for y.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ndpa/core_model.hpp"
#include "ndpa/detail/lyapunov.hpp"
#include "ndpa/detail/quadrature.hpp"
#include "ndpa/error.hpp"
#include "ndpa/steady_state.hpp"

namespace ndpa {

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

enum class ModelKind { Below, Above, AboveEliminated, Detuned, Sector };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Below: return "below";
        case ModelKind::Above: return "above";
        case ModelKind::AboveEliminated: return "above-eliminated";
        case ModelKind::Detuned: return "detuned";
        case ModelKind::Sector: return "sector";
    }
    return "?";
}

struct FluctuationModel {
    ModelKind kind = ModelKind::Below;
    Eigen::MatrixXd drift;      ///< d(raw)/dt = drift * raw + noise
    Eigen::MatrixXd diffusion;  ///< <noise noise^T> per unit time
    Eigen::MatrixXd rotation;   ///< collective = rotation * raw (orthogonal)
    std::vector<std::string> raw_labels;
    std::vector<std::string> labels;  ///< collective quadrature names
    double rate_scale = 1.0;          ///< max(linewidths, |delta|), rad/s
    double mu = 0.0;
    double delta = 0.0;

    [[nodiscard]] Eigen::Index size() const { return drift.rows(); }

    [[nodiscard]] Eigen::MatrixXd collective_drift() const { return rotation * drift * rotation.transpose(); }
    [[nodiscard]] Eigen::MatrixXd collective_diffusion() const {
        return rotation * diffusion * rotation.transpose();
    }

    [[nodiscard]] std::optional<Eigen::Index> index_of(const std::string& label) const {
        auto it = std::find(labels.begin(), labels.end(), label);
        if (it == labels.end()) return std::nullopt;
        return static_cast<Eigen::Index>(it - labels.begin());
    }

    /// Drift block of the alpha (x) quadratures; valid when delta == 0.
    [[nodiscard]] Eigen::MatrixXd m_alpha() const {
        const Eigen::Index h = size() / 2;
        return drift.topLeftCorner(h, h);
    }
    [[nodiscard]] Eigen::MatrixXd m_beta() const {
        const Eigen::Index h = size() / 2;
        return drift.bottomRightCorner(h, h);
    }
};

namespace detail {

inline Eigen::MatrixXd sum_difference_rotation(Eigen::Index block, bool with_pump) {
    // Per quadrature block: [[1, 1, 0], [1, -1, 0], [0, 0, sqrt2]] / sqrt2.
    const Eigen::Index n = with_pump ? 3 : 2;
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
    const double s = 1.0 / std::numbers::sqrt2;
    r(0, 0) = s;
    r(0, 1) = s;
    r(1, 0) = s;
    r(1, 1) = -s;
    if (with_pump) r(2, 2) = 1.0;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(block * n, block * n);
    for (Eigen::Index b = 0; b < block; ++b) out.block(b * n, b * n, n, n) = r;
    return out;
}

/// Thermal amplitude ratios entering the normalized drift: entry (k, l) of a
/// physical drift becomes M_kl * x_l / x_k with x_k^2 = 1/(m_k omega_k^2).
inline double amplitude_ratio(const ModeParams& to, const ModeParams& from) {
    return std::sqrt((to.mass * to.omega * to.omega) / (from.mass * from.omega * from.omega));
}

/// Normalizes a physical per-quadrature drift over the given modes.
inline Eigen::MatrixXd normalize_drift(const Eigen::MatrixXd& physical, const std::vector<ModeParams>& modes) {
    Eigen::MatrixXd out = physical;
    for (Eigen::Index k = 0; k < out.rows(); ++k) {
        for (Eigen::Index l = 0; l < out.cols(); ++l) {
            out(k, l) *= amplitude_ratio(modes[k], modes[l]);
        }
    }
    return out;
}

/// The 3x3 drift of one quadrature family about a steady state with pump
/// amplitude `pump` and membrane amplitudes `a_i`, `a_j` (all magnitudes).
/// `sign` is -1 for alpha and +1 for beta.
inline Eigen::Matrix3d general_drift(const SystemConfig& sys, double pump, double a_i, double a_j, double sign) {
    const double ki = kappa(sys.mode_i, sys.g);
    const double kj = kappa(sys.mode_j, sys.g);
    const double ks = kappa(sys.mode_s, sys.g);
    Eigen::Matrix3d m;
    m << -sys.mode_i.gamma, sign * ki * pump, ki * a_j,
         sign * kj * pump, -sys.mode_j.gamma, kj * a_i,
         -ks * a_j, -ks * a_i, -sys.mode_s.gamma;
    return 0.5 * m;
}

inline Eigen::MatrixXd block_diag(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    out.topLeftCorner(a.rows(), a.cols()) = a;
    out.bottomRightCorner(b.rows(), b.cols()) = b;
    return out;
}

inline FluctuationModel resonant_model(const SystemConfig& sys, double mu, double pump, double a_i, double a_j,
                                       ModelKind kind) {
    const std::vector<ModeParams> modes{sys.mode_i, sys.mode_j, sys.mode_s};
    const Eigen::MatrixXd ma = normalize_drift(general_drift(sys, pump, a_i, a_j, -1.0), modes);
    const Eigen::MatrixXd mb = normalize_drift(general_drift(sys, pump, a_i, a_j, +1.0), modes);
    FluctuationModel fm;
    fm.kind = kind;
    fm.drift = block_diag(ma, mb);
    Eigen::VectorXd d(6);
    d << sys.mode_i.gamma, sys.mode_j.gamma, sys.mode_s.gamma, sys.mode_i.gamma, sys.mode_j.gamma, sys.mode_s.gamma;
    fm.diffusion = d.asDiagonal();
    fm.rotation = sum_difference_rotation(2, true);
    fm.raw_labels = {"alpha_i", "alpha_j", "alpha_s", "beta_i", "beta_j", "beta_s"};
    fm.labels = {"x+", "x-", "xS", "y+", "y-", "yS"};
    fm.rate_scale = std::max({sys.mode_i.gamma, sys.mode_j.gamma, sys.mode_s.gamma});
    fm.mu = mu;
    return fm;
}

/// Instantaneous-response elimination of the raw indices in `drop`
/// (Schur complement). Noise injected into the eliminated coordinates is fed
/// through to the kept ones, so the resulting diffusion is a full matrix.
inline void eliminate(FluctuationModel& fm, const std::vector<Eigen::Index>& drop) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < fm.size(); ++k) {
        if (std::find(drop.begin(), drop.end(), k) == drop.end()) keep.push_back(k);
    }
    auto pick = [](const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& r, const std::vector<Eigen::Index>& c) {
        Eigen::MatrixXd out(r.size(), c.size());
        for (std::size_t a = 0; a < r.size(); ++a)
            for (std::size_t b = 0; b < c.size(); ++b) out(a, b) = m(r[a], c[b]);
        return out;
    };
    const Eigen::MatrixXd mkk = pick(fm.drift, keep, keep);
    const Eigen::MatrixXd mke = pick(fm.drift, keep, drop);
    const Eigen::MatrixXd mek = pick(fm.drift, drop, keep);
    const Eigen::MatrixXd mee = pick(fm.drift, drop, drop);
    const Eigen::MatrixXd dkk = pick(fm.diffusion, keep, keep);
    const Eigen::MatrixXd dke = pick(fm.diffusion, keep, drop);
    const Eigen::MatrixXd dee = pick(fm.diffusion, drop, drop);
    const Eigen::MatrixXd gain = mke * mee.inverse();  // keep <- eliminated feed-through
    Eigen::MatrixXd m_eff = mkk - gain * mek;
    Eigen::MatrixXd d_eff = dkk - gain * dke.transpose() - dke * gain.transpose() + gain * dee * gain.transpose();
    d_eff = 0.5 * (d_eff + d_eff.transpose());
    std::vector<std::string> raw;
    for (auto k : keep) raw.push_back(fm.raw_labels[k]);
    fm.drift = std::move(m_eff);
    fm.diffusion = std::move(d_eff);
    fm.raw_labels = std::move(raw);
}

inline double max_real_eigenvalue(const Eigen::MatrixXd& m) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    return es.eigenvalues().real().maxCoeff();
}

/// Physical-to-normalized 4x4 drift of the detuned model over
/// (alpha_i, alpha_j, beta_i, beta_j), no validation.
inline Eigen::MatrixXd detuned_drift(const SystemConfig& sys, double mu, double delta) {
    const double pump = mu * critical_pump_amplitude(sys);
    const std::vector<ModeParams> modes{sys.mode_i, sys.mode_j};
    const Eigen::MatrixXd ma =
        normalize_drift(general_drift(sys, pump, 0.0, 0.0, -1.0).topLeftCorner(2, 2), modes);
    const Eigen::MatrixXd mb =
        normalize_drift(general_drift(sys, pump, 0.0, 0.0, +1.0).topLeftCorner(2, 2), modes);
    Eigen::MatrixXd m = block_diag(ma, mb);
    m.topRightCorner(2, 2) = -0.5 * delta * Eigen::Matrix2d::Identity();
    m.bottomLeftCorner(2, 2) = 0.5 * delta * Eigen::Matrix2d::Identity();
    return m;
}

}  // namespace detail

/// Linearization about the trivial state (mu <= 1, zero detuning). At mu == 1
/// the returned model is marginally stable.
[[nodiscard]] inline FluctuationModel build_below(const SystemConfig& sys, const DriveConfig& drive) {
    validate(sys);
    validate(drive);
    if (drive.mu > 1.0) throw Error(ErrorKind::AboveThreshold, "build_below requires mu <= 1");
    if (drive.delta != 0.0) {
        throw Error(ErrorKind::InvalidParameter, "build_below requires zero detuning; use build_detuned");
    }
    const double pump = drive.mu * critical_pump_amplitude(sys);
    return detail::resonant_model(sys, drive.mu, pump, 0.0, 0.0, ModelKind::Below);
}

/// Linearization about the self-oscillating state (mu > 1). With
/// eliminate_pump the pump quadratures follow the membranes instantaneously
/// and the result is 4x4 over (alpha_i, alpha_j, beta_i, beta_j).
[[nodiscard]] inline FluctuationModel build_above(const SystemConfig& sys, const DriveConfig& drive,
                                                  bool eliminate_pump) {
    validate(sys);
    validate(drive);
    if (!(drive.mu > 1.0)) throw Error(ErrorKind::BelowThreshold, "build_above requires mu > 1");
    if (drive.delta != 0.0) {
        throw Error(ErrorKind::DetunedAboveThreshold, "the above-threshold state with detuning is not modeled");
    }
    if (eliminate_pump &&
        sys.mode_s.gamma < sys.elimination_guard * std::max(sys.mode_i.gamma, sys.mode_j.gamma)) {
        throw Error(ErrorKind::EliminationGuardViolated,
                    "gamma_S / max(gamma_i, gamma_j) below guard " + std::to_string(sys.elimination_guard));
    }
    const double pump = critical_pump_amplitude(sys);
    const double a_i = membrane_amplitude(sys, Membrane::I, drive.mu);
    const double a_j = membrane_amplitude(sys, Membrane::J, drive.mu);
    FluctuationModel fm = detail::resonant_model(sys, drive.mu, pump, a_i, a_j, ModelKind::Above);
    if (eliminate_pump) {
        detail::eliminate(fm, {2, 5});
        fm.kind = ModelKind::AboveEliminated;
        fm.rotation = detail::sum_difference_rotation(2, false);
        fm.labels = {"x+", "x-", "y+", "y-"};
        fm.rate_scale = std::max(sys.mode_i.gamma, sys.mode_j.gamma);
    }
    return fm;
}

/// Drift stability boundary in mu for fixed detuning, located by bisection
/// on the sign of the largest real part of the detuned drift spectrum.
[[nodiscard]] inline double stability_boundary(const SystemConfig& sys, double delta, double tol = 1e-12) {
    auto unstable = [&](double mu) { return detail::max_real_eigenvalue(detail::detuned_drift(sys, mu, delta)) >= 0.0; };
    double lo = 0.0;
    double hi = 1.0;
    while (!unstable(hi)) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw Error(ErrorKind::InvalidRange, "no instability found below mu = 1e6");
    }
    while (hi - lo > tol * hi) {
        const double mid = 0.5 * (lo + hi);
        (unstable(mid) ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

/// 4x4 model for a detuned drive below threshold, in the frame rotating at
/// delta/2: drift [[M_alpha, -(delta/2) I], [(delta/2) I, M_beta]].
[[nodiscard]] inline FluctuationModel build_detuned(const SystemConfig& sys, const DriveConfig& drive) {
    validate(sys);
    validate(drive);
    check_detuning(sys, drive);
    FluctuationModel fm;
    fm.kind = ModelKind::Detuned;
    fm.drift = detail::detuned_drift(sys, drive.mu, drive.delta);
    fm.rate_scale = std::max({sys.mode_i.gamma, sys.mode_j.gamma, std::abs(drive.delta)});
    if (detail::max_real_eigenvalue(fm.drift) >= -1e-12 * fm.rate_scale) {
        throw Error(ErrorKind::AboveThreshold, "drive at or above the detuned instability threshold");
    }
    Eigen::Vector4d d(sys.mode_i.gamma, sys.mode_j.gamma, sys.mode_i.gamma, sys.mode_j.gamma);
    fm.diffusion = d.asDiagonal();
    fm.rotation = detail::sum_difference_rotation(2, false);
    fm.raw_labels = {"alpha_i", "alpha_j", "beta_i", "beta_j"};
    fm.labels = {"x+", "x-", "y+", "y-"};
    fm.mu = drive.mu;
    fm.delta = drive.delta;
    return fm;
}

/// Dispatches on regime: detuned if delta != 0, below for mu <= 1, above
/// (pump eliminated) otherwise.
[[nodiscard]] inline FluctuationModel build_model(const SystemConfig& sys, const DriveConfig& drive,
                                                  bool eliminate_pump = true) {
    if (drive.delta != 0.0) return build_detuned(sys, drive);
    if (drive.mu <= 1.0) return build_below(sys, drive);
    return build_above(sys, drive, eliminate_pump);
}

/// Restricts a model to collective quadratures that form a closed,
/// independently driven sector (no drift or noise coupling to the rest).
[[nodiscard]] inline FluctuationModel sector(const FluctuationModel& fm, const std::vector<std::string>& names) {
    const Eigen::MatrixXd mc = fm.collective_drift();
    const Eigen::MatrixXd dc = fm.collective_diffusion();
    std::vector<Eigen::Index> in;
    for (const auto& n : names) {
        auto idx = fm.index_of(n);
        if (!idx) throw Error(ErrorKind::LabelMismatch, "unknown quadrature '" + n + "'");
        in.push_back(*idx);
    }
    const double tol = 1e-12 * fm.rate_scale;
    for (Eigen::Index r : in) {
        for (Eigen::Index c = 0; c < fm.size(); ++c) {
            if (std::find(in.begin(), in.end(), c) != in.end()) continue;
            if (std::abs(mc(r, c)) > tol || std::abs(mc(c, r)) > tol || std::abs(dc(r, c)) > tol) {
                throw Error(ErrorKind::InvalidParameter,
                            "quadrature '" + fm.labels[r] + "' couples to '" + fm.labels[c] + "'");
            }
        }
    }
    const auto n = static_cast<Eigen::Index>(in.size());
    FluctuationModel out;
    out.kind = ModelKind::Sector;
    out.drift.resize(n, n);
    out.diffusion.resize(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = 0; b < n; ++b) {
            out.drift(a, b) = mc(in[a], in[b]);
            out.diffusion(a, b) = dc(in[a], in[b]);
        }
    }
    out.rotation = Eigen::MatrixXd::Identity(n, n);
    out.raw_labels = names;
    out.labels = names;
    out.rate_scale = fm.rate_scale;
    out.mu = fm.mu;
    out.delta = fm.delta;
    return out;
}

[[nodiscard]] inline Eigen::VectorXcd drift_eigenvalues(const FluctuationModel& fm) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(fm.drift, false);
    return es.eigenvalues();
}

[[nodiscard]] inline bool is_strictly_stable(const FluctuationModel& fm, double rel_tol = 1e-10) {
    return detail::max_real_eigenvalue(fm.drift) < -rel_tol * fm.rate_scale;
}

// ---------------------------------------------------------------------------
// Spectra
// ---------------------------------------------------------------------------

/// Raw-basis spectral density (1/2pi) (M + i w)^-1 D (M^T - i w)^-1.
[[nodiscard]] inline Eigen::MatrixXcd spectral_density_raw(const FluctuationModel& fm, double omega) {
    const Eigen::Index n = fm.size();
    const Eigen::MatrixXcd a =
        fm.drift.cast<std::complex<double>>() + std::complex<double>(0.0, omega) * Eigen::MatrixXcd::Identity(n, n);
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(a);
    const double scale = a.cwiseAbs().maxCoeff();
    lu.setThreshold(1e-13);
    if (!lu.isInvertible() || std::abs(lu.determinant()) <= std::pow(1e-13 * scale, static_cast<double>(n))) {
        throw Error(ErrorKind::SingularAtFrequency,
                    "M + i*omega is singular at omega = " + std::to_string(omega) + " (marginal mode)");
    }
    const Eigen::MatrixXcd inv = lu.inverse();
    Eigen::MatrixXcd s = inv * fm.diffusion.cast<std::complex<double>>() * inv.adjoint();
    s /= 2.0 * std::numbers::pi;
    return 0.5 * (s + s.adjoint()).eval();
}

/// Collective-quadrature spectral density R S R^T.
[[nodiscard]] inline Eigen::MatrixXcd spectral_density(const FluctuationModel& fm, double omega) {
    const Eigen::MatrixXcd r = fm.rotation.cast<std::complex<double>>();
    return r * spectral_density_raw(fm, omega) * r.transpose();
}

struct SpectrumSeries {
    std::vector<std::string> labels;
    std::vector<double> frequencies;
    std::vector<Eigen::MatrixXcd> values;
};

[[nodiscard]] inline SpectrumSeries spectrum_series(const FluctuationModel& fm, const std::vector<double>& grid) {
    SpectrumSeries out;
    out.labels = fm.labels;
    out.frequencies = grid;
    out.values.reserve(grid.size());
    for (double w : grid) out.values.push_back(spectral_density(fm, w));
    return out;
}

// ---------------------------------------------------------------------------
// Variances
// ---------------------------------------------------------------------------

enum class CovarianceMethod { FrequencyIntegral, LyapunovSolve, FiniteTime };

inline const char* to_string(CovarianceMethod m) {
    switch (m) {
        case CovarianceMethod::FrequencyIntegral: return "frequency-integral";
        case CovarianceMethod::LyapunovSolve: return "lyapunov";
        case CovarianceMethod::FiniteTime: return "finite-time";
    }
    return "?";
}

struct CovarianceReport {
    std::vector<std::string> labels;
    Eigen::MatrixXd sigma;
    CovarianceMethod method = CovarianceMethod::FrequencyIntegral;
    double tau_m = std::numeric_limits<double>::infinity();  ///< measurement time for FiniteTime
    BoolMatrix divergent;
    double error_estimate = 0.0;

    [[nodiscard]] double at(const std::string& row, const std::string& col) const {
        auto find = [&](const std::string& s) {
            auto it = std::find(labels.begin(), labels.end(), s);
            if (it == labels.end()) throw Error(ErrorKind::LabelMismatch, "unknown quadrature '" + s + "'");
            return static_cast<Eigen::Index>(it - labels.begin());
        };
        return sigma(find(row), find(col));
    }
    [[nodiscard]] double var(const std::string& name) const { return at(name, name); }
};

/// Integration band: the full line, or |omega| >= omega_min.
struct Band {
    double omega_min = 0.0;
    CovarianceMethod method = CovarianceMethod::FrequencyIntegral;
    double tau_m = std::numeric_limits<double>::infinity();

    static Band full() { return {}; }
    static Band low_cut(double omega_min) { return {omega_min, CovarianceMethod::FiniteTime, 2.0 * std::numbers::pi / omega_min}; }
    /// Sharp cut at 2 pi / tau_m.
    static Band measurement_time(double tau_m) {
        return {2.0 * std::numbers::pi / tau_m, CovarianceMethod::FiniteTime, tau_m};
    }
};

/// Collective entries fed by a marginal (zero real part) or growing drift
/// eigenmode. For the full band these integrals diverge at omega -> 0.
[[nodiscard]] inline BoolMatrix divergent_entries(const FluctuationModel& fm, bool include_marginal) {
    const Eigen::MatrixXd mc = fm.collective_drift();
    const Eigen::MatrixXd dc = fm.collective_diffusion();
    const Eigen::Index n = mc.rows();
    BoolMatrix flags = BoolMatrix::Constant(n, n, false);
    Eigen::EigenSolver<Eigen::MatrixXd> es(mc, true);
    const Eigen::MatrixXcd v = es.eigenvectors();
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(v);
    if (!lu.isInvertible()) {
        // Defective spectrum: flag whatever touches any non-decaying mode.
        for (Eigen::Index p = 0; p < n; ++p) {
            if (es.eigenvalues()(p).real() >= -1e-10 * fm.rate_scale) flags.setConstant(true);
        }
        return flags;
    }
    const Eigen::MatrixXcd left = lu.inverse();  // rows are left eigenvectors
    const double tol = 1e-10 * fm.rate_scale;
    for (Eigen::Index p = 0; p < n; ++p) {
        const double re = es.eigenvalues()(p).real();
        const bool bad = include_marginal ? re >= -tol : re > tol;
        if (!bad) continue;
        const Eigen::RowVectorXcd w = left.row(p);
        const double drive = (w * dc.cast<std::complex<double>>() * w.adjoint())(0, 0).real();
        if (re <= tol && drive <= 1e-12 * dc.cwiseAbs().maxCoeff() * w.squaredNorm()) continue;
        const Eigen::VectorXcd col = v.col(p) / v.col(p).norm();
        for (Eigen::Index k = 0; k < n; ++k) {
            for (Eigen::Index l = 0; l < n; ++l) {
                if (std::abs(col(k)) > 1e-8 && std::abs(col(l)) > 1e-8) flags(k, l) = true;
            }
        }
    }
    return flags;
}

/// Wiener-Khintchine variance: integral of the collective spectrum over
/// |omega| >= band.omega_min (i.e. 2 * int_{omega_min}^inf Re S). Entries that
/// diverge are returned as +inf and flagged.
[[nodiscard]] inline CovarianceReport variance_integral(const FluctuationModel& fm, const Band& band = Band::full()) {
    const Eigen::MatrixXd mc = fm.collective_drift();
    const Eigen::MatrixXd dc = fm.collective_diffusion();
    const Eigen::Index n = mc.rows();
    const bool full = !(band.omega_min > 0.0);
    BoolMatrix flags = divergent_entries(fm, full);
    const BoolMatrix mask = !flags;

    Eigen::EigenSolver<Eigen::MatrixXd> es(mc, false);
    double max_abs = fm.rate_scale;
    std::vector<double> scales;
    for (Eigen::Index p = 0; p < n; ++p) {
        const auto lam = es.eigenvalues()(p);
        max_abs = std::max(max_abs, std::abs(lam));
        if (std::abs(lam) > 1e-10 * fm.rate_scale) scales.push_back(std::abs(lam));
        if (std::abs(lam.imag()) > 1e-10 * fm.rate_scale) scales.push_back(std::abs(lam.imag()));
        if (std::abs(lam.real()) > 1e-10 * fm.rate_scale) scales.push_back(std::abs(lam.real()));
    }
    const double lo = full ? 0.0 : band.omega_min;
    const double hi = 1e3 * max_abs;
    std::vector<double> bp{lo, hi};
    double smallest = hi;
    for (double s : scales) {
        for (double f : {0.25, 0.5, 1.0, 2.0, 4.0}) {
            if (s * f > lo && s * f < hi) bp.push_back(s * f);
        }
        smallest = std::min(smallest, s);
    }
    if (lo > 0.0) smallest = std::min(smallest, lo);
    for (double w = 0.25 * smallest; w < hi; w *= 4.0) {
        if (w > lo) bp.push_back(w);
    }

    const Eigen::MatrixXcd mcc = mc.cast<std::complex<double>>();
    const Eigen::MatrixXcd dcc = dc.cast<std::complex<double>>();
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);
    auto integrand = [&](double w) -> Eigen::MatrixXd {
        const Eigen::MatrixXcd inv = (mcc + std::complex<double>(0.0, w) * id).partialPivLu().inverse();
        const Eigen::MatrixXcd s = inv * dcc * inv.adjoint();
        return s.real() / std::numbers::pi;  // two-sided: 2 Re S / (2 pi) per unit omega
    };
    detail::QuadratureOptions opt;
    opt.rel_tol = 1e-13;
    const auto q = detail::integrate_adaptive(integrand, bp, mask, opt);

    // Analytic tail beyond hi: Re S ~ (1/2pi) [D / w^2 - (M^2 D - M D M^T + D M^T^2) / w^4].
    const Eigen::MatrixXd c2 = mc * mc * dc - mc * dc * mc.transpose() + dc * mc.transpose() * mc.transpose();
    const Eigen::MatrixXd tail = (dc / hi - c2 / (3.0 * hi * hi * hi)) / std::numbers::pi;

    CovarianceReport rep;
    rep.labels = fm.labels;
    rep.method = band.method;
    rep.tau_m = band.tau_m;
    rep.sigma = q.value + tail;
    rep.sigma = 0.5 * (rep.sigma + rep.sigma.transpose()).eval();
    rep.divergent = flags;
    rep.error_estimate = q.error;
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index l = 0; l < n; ++l)
            if (flags(k, l)) rep.sigma(k, l) = std::numeric_limits<double>::infinity();
    return rep;
}

/// Stationary covariance from M S + S M^T = -D (collective basis).
[[nodiscard]] inline CovarianceReport variance_lyapunov(const FluctuationModel& fm) {
    if (!is_strictly_stable(fm)) {
        throw Error(ErrorKind::MarginallyStable, "drift has an eigenvalue with non-negative real part");
    }
    CovarianceReport rep;
    rep.labels = fm.labels;
    rep.method = CovarianceMethod::LyapunovSolve;
    rep.sigma = detail::solve_lyapunov(fm.collective_drift(), fm.collective_diffusion());
    rep.divergent = BoolMatrix::Constant(fm.size(), fm.size(), false);
    return rep;
}

}  // namespace ndpa
