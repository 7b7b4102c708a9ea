#pragma once

// Analytic variances and spectra. All variances are normalized by the
// thermal variance k_B T / (m omega^2); spectra are per unit angular
// frequency and integrate over the full line to the matching variance.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <utility>
#include <vector>

#include "ndpa/core_model.hpp"
#include "ndpa/error.hpp"

namespace ndpa::closed_form {

namespace detail {

inline void require_below(double mu) {
    if (!(mu >= 0.0)) throw Error(ErrorKind::InvalidParameter, "mu must be >= 0");
    if (!(mu < 1.0)) throw Error(ErrorKind::AtOrAboveThreshold, "closed form requires mu < 1");
}

}  // namespace detail

struct MatchedBelow {
    double x_plus, x_minus, y_plus, y_minus;
};

/// sigma_{x+-} = 1/(1 +- mu) = sigma_{y-+}.
[[nodiscard]] inline MatchedBelow below_matched_variance(double mu) {
    detail::require_below(mu);
    const double sq = 1.0 / (1.0 + mu);
    const double amp = 1.0 / (1.0 - mu);
    return {sq, amp, amp, sq};
}

/// Collective spectra below threshold, matched modes:
/// (2/pi) gamma / (gamma^2 (1 +- mu)^2 + 4 w^2) for x+- (and y-+).
[[nodiscard]] inline double below_matched_spectrum(double mu, double gamma, double omega, bool squeezed) {
    const double f = squeezed ? 1.0 + mu : 1.0 - mu;
    return 2.0 / std::numbers::pi * gamma / (gamma * gamma * f * f + 4.0 * omega * omega);
}

/// Zero-frequency squeezing relative to the undriven value, 1/(1+mu)^2.
[[nodiscard]] inline double zero_frequency_squeezing(double mu) {
    if (!(mu >= 0.0) || mu > 1.0) throw Error(ErrorKind::InvalidParameter, "mu must lie in [0, 1]");
    return 1.0 / ((1.0 + mu) * (1.0 + mu));
}

struct MismatchedBelow {
    double y_plus, y_minus, cross;
};

/// Variances of y+- and their cross-correlation for mismatched linewidths
/// and frequencies. The x quadratures follow from sigma_{x+-} = sigma_{y-+}.
[[nodiscard]] inline MismatchedBelow below_mismatched_variance(double mu, const AsymmetryParams& a) {
    detail::require_below(mu);
    validate(a);
    const double dg = a.delta_gamma;
    const double dw = a.delta_omega;
    const double mu2 = mu * mu;
    const double base = 1.0 + mu2 * dw * (dw - dg) / (1.0 - dw * dw);
    const double split = mu * std::sqrt((1.0 - dg * dg) / (1.0 - dw * dw));
    return {(base + split) / (1.0 - mu2), (base - split) / (1.0 - mu2),
            mu2 * (dw - dg) / ((1.0 - mu2) * (1.0 - dw * dw))};
}

struct PeakSqueezing {
    double mu = 0.0;
    double sigma = 0.0;
    bool interior = false;       ///< optimum strictly inside [0, mu_max]
    double derivative = 0.0;     ///< d sigma / d mu at the optimum (analytic)
};

/// Analytic d sigma_{y-} / d mu.
[[nodiscard]] inline double squeezed_variance_derivative(double mu, const AsymmetryParams& a) {
    const double dw = a.delta_omega;
    const double c = dw * (dw - a.delta_gamma) / (1.0 - dw * dw);
    const double b = std::sqrt((1.0 - a.delta_gamma * a.delta_gamma) / (1.0 - dw * dw));
    const double den = 1.0 - mu * mu;
    return (-b * mu * mu + 2.0 * (1.0 + c) * mu - b) / (den * den);
}

/// Minimizes sigma_{y-} over mu in [0, 1 - 1e-6] by golden-section search.
[[nodiscard]] inline PeakSqueezing peak_squeezing(const AsymmetryParams& a, double tol = 1e-8) {
    validate(a);
    constexpr double mu_max = 1.0 - 1e-6;
    auto f = [&](double mu) { return below_mismatched_variance(mu, a).y_minus; };
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 0.0;
    double hi = mu_max;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = f(x1);
    double f2 = f(x2);
    while (hi - lo > tol) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    PeakSqueezing p;
    p.mu = 0.5 * (lo + hi);
    // Snap to the end of the range when the minimum sits on it.
    if (f(mu_max) <= f(p.mu)) p.mu = mu_max;
    p.sigma = f(p.mu);
    p.derivative = squeezed_variance_derivative(p.mu, a);
    p.interior = p.mu < mu_max - 10.0 * tol;
    return p;
}

struct SqueezingCurve {
    std::vector<double> mu_grid;
    std::vector<double> amplified;
    std::vector<double> squeezed;
    std::vector<double> crossings;  ///< drive of optimum squeezing
};

[[nodiscard]] inline SqueezingCurve squeezing_curve(const AsymmetryParams& a, const std::vector<double>& mu_grid) {
    SqueezingCurve c;
    c.mu_grid = mu_grid;
    for (double mu : mu_grid) {
        const auto v = below_mismatched_variance(mu, a);
        c.amplified.push_back(v.y_plus);
        c.squeezed.push_back(v.y_minus);
    }
    c.crossings.push_back(peak_squeezing(a).mu);
    return c;
}

// ---------------------------------------------------------------------------
// Detuned drive (matched modes)
// ---------------------------------------------------------------------------

struct Detuned {
    double x_plus, x_minus, y_plus, y_minus;
    double xy_plus;   ///< sigma_{x+, y+}
    double xy_minus;  ///< sigma_{x-, y-}
};

/// lambda_+- from lambda^2 = gamma^2 (1 + mu^2) - delta^2 +- 2 gamma sqrt(gamma^2 mu^2 - delta^2),
/// evaluated in complex arithmetic so that delta > gamma mu is covered.
[[nodiscard]] inline std::pair<std::complex<double>, std::complex<double>> detuned_lambdas(double mu, double delta,
                                                                                         double gamma) {
    using C = std::complex<double>;
    const C root = std::sqrt(C(gamma * gamma * mu * mu - delta * delta, 0.0));
    const C base(gamma * gamma * (1.0 + mu * mu) - delta * delta, 0.0);
    return {std::sqrt(base + 2.0 * gamma * root), std::sqrt(base - 2.0 * gamma * root)};
}

/// Normalized steady-state variances for a detuned drive. The (x-, y-)
/// correlation has the opposite sign to (x+, y+) for the drift
/// [[M_alpha, -(delta/2) I], [(delta/2) I, M_beta]].
[[nodiscard]] inline Detuned detuned_variances(double mu, double delta, double gamma) {
    if (!(gamma > 0.0)) throw Error(ErrorKind::InvalidParameter, "gamma must be > 0");
    if (!(mu >= 0.0)) throw Error(ErrorKind::InvalidParameter, "mu must be >= 0");
    const double r = delta / gamma;
    if (!(mu < std::sqrt(1.0 + r * r))) {
        throw Error(ErrorKind::AtOrAboveDetunedThreshold, "mu must be below sqrt(1 + (delta/gamma)^2)");
    }
    using C = std::complex<double>;
    const auto [lp, lm] = detuned_lambdas(mu, delta, gamma);
    const C denom = lp * lm * (lp + lm);
    auto var = [&](double sign) {
        const double f = 1.0 - sign * mu;
        const C v = gamma * ((delta * delta + gamma * gamma * f * f - lm * lm) / denom + 1.0 / lp);
        return v;
    };
    const C xp = var(+1.0);
    const C xm = var(-1.0);
    const C cross = gamma * (2.0 * delta * gamma * mu) / denom;
    constexpr double tol = 1e-10;
    for (const C& v : {xp, xm, cross}) {
        if (std::abs(v.imag()) > tol * std::max(1.0, std::abs(v))) {
            throw Error(ErrorKind::InvalidParameter, "detuned variance has a non-vanishing imaginary part");
        }
    }
    return {xp.real(), xm.real(), xm.real(), xp.real(), -cross.real(), cross.real()};
}

/// Minimum over mu of the squeezed variance sigma_{x+} at fixed detuning,
/// (1 + r / sqrt(1 + r^2)) / 2 with r = delta / gamma.
[[nodiscard]] inline double detuned_peak_squeezing(double delta, double gamma) {
    const double r = delta / gamma;
    return 0.5 * (1.0 + r / std::sqrt(1.0 + r * r));
}

// ---------------------------------------------------------------------------
// Above threshold (matched modes, pump eliminated)
// ---------------------------------------------------------------------------

struct MatchedAbove {
    double y_plus, y_minus;
};

[[nodiscard]] inline MatchedAbove above_matched(double mu) {
    if (!(mu > 1.0)) throw Error(ErrorKind::BelowThreshold, "closed form requires mu > 1");
    return {mu / (2.0 * (mu - 1.0)), 0.5};
}

/// Diagonal spectra (y+, y-) above threshold.
[[nodiscard]] inline std::pair<double, double> above_matched_spectrum_y(double mu, double gamma, double omega) {
    const double a = gamma * (mu - 1.0);
    const double w2 = omega * omega;
    return {gamma * mu / (2.0 * std::numbers::pi * (a * a + w2)), gamma / (2.0 * std::numbers::pi * (gamma * gamma + w2))};
}

/// Diagonal spectra (x+, x-) above threshold; x- diverges as omega^-2.
[[nodiscard]] inline std::pair<double, double> above_matched_spectrum_x(double mu, double gamma, double omega) {
    const double w2 = omega * omega;
    return {gamma * mu / (2.0 * std::numbers::pi * (gamma * gamma * mu * mu + w2)), gamma / (2.0 * std::numbers::pi * w2)};
}

/// Phase-difference variance after time tau: (x_th / A)^2 gamma tau / (2 pi^2).
[[nodiscard]] inline double phase_diffusion(double mu, double amplitude_ratio, double gamma, double tau) {
    if (!(mu > 1.0)) throw Error(ErrorKind::BelowThreshold, "phase diffusion requires mu > 1");
    if (!(amplitude_ratio > 0.0) || !(gamma > 0.0) || !(tau >= 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "amplitude ratio and gamma must be > 0, tau >= 0");
    }
    return gamma * tau / (2.0 * std::numbers::pi * std::numbers::pi * amplitude_ratio * amplitude_ratio);
}

/// Finite-time variance of a Lorentzian quadrature with spectrum
/// noise / (2 pi (a^2 + w^2)), integrated over |w| >= 2 pi / tau.
/// At a == 0 this is noise tau / (2 pi^2).
[[nodiscard]] inline double truncated_lorentzian(double noise, double a, double tau) {
    const double wc = 2.0 * std::numbers::pi / tau;
    if (a == 0.0) return noise / (std::numbers::pi * wc);
    return noise / (std::numbers::pi * std::abs(a)) * (0.5 * std::numbers::pi - std::atan(wc / std::abs(a)));
}

}  // namespace ndpa::closed_form
