#pragma once

// Mean-field (noise-free) fixed points of the slow-flow amplitude equations
//
//   2 dA_i/dt = gamma_i [ -A_i + i (g/2) chi_i conj(A_j) A_S ]
//   2 dA_j/dt = gamma_j [ -A_j + i (g/2) chi_j conj(A_i) A_S ]
//   2 dA_S/dt = gamma_S [ -A_S + i (g/2) chi_S A_i A_j + i chi_S F_S ]
//
// with the drive written as i chi_S F_S = i mu |A_S,cr| exp(i phi_S).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>

#include "ndpa/core_model.hpp"
#include "ndpa/error.hpp"

namespace ndpa {

enum class Regime { Below, AtThreshold, Above };

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::Below: return "below";
        case Regime::AtThreshold: return "at-threshold";
        case Regime::Above: return "above";
    }
    return "?";
}

struct SteadyState {
    std::complex<double> a_i;
    std::complex<double> a_j;
    std::complex<double> a_s;
    Regime regime = Regime::Below;
    double mu = 0.0;
};

/// Threshold pump amplitude 2 / (g sqrt(chi_i chi_j)).
[[nodiscard]] inline double critical_pump_amplitude(const SystemConfig& sys) {
    return 2.0 / (sys.g * std::sqrt(susceptibility(sys.mode_i) * susceptibility(sys.mode_j)));
}

/// Drive at which the trivial state loses stability for detuning delta
/// (matched membrane linewidth gamma).
[[nodiscard]] inline double detuned_threshold(double gamma, double delta) {
    if (!(gamma > 0.0)) throw Error(ErrorKind::InvalidParameter, "gamma must be > 0");
    const double r = delta / gamma;
    return std::sqrt(1.0 + r * r);
}

[[nodiscard]] inline Regime classify(double mu) {
    if (mu < 1.0) return Regime::Below;
    if (mu == 1.0) return Regime::AtThreshold;
    return Regime::Above;
}

enum class Membrane { I, J };

/// Membrane amplitude above threshold, (2 / (g sqrt(chi_partner chi_S))) sqrt(mu - 1).
/// The susceptibility is that of the other membrane: the fixed point of the
/// flow has |a_i|^2 / |a_j|^2 = chi_i / chi_j.
[[nodiscard]] inline double membrane_amplitude(const SystemConfig& sys, Membrane which, double mu) {
    if (mu <= 1.0) return 0.0;
    const ModeParams& partner = which == Membrane::I ? sys.mode_j : sys.mode_i;
    return 2.0 / (sys.g * std::sqrt(susceptibility(partner) * susceptibility(sys.mode_s))) * std::sqrt(mu - 1.0);
}

/// Solves for the fixed point. The free phase difference phi_i - phi_j is
/// fixed to zero, so phi_i = phi_j = phi_S / 2 above threshold.
[[nodiscard]] inline SteadyState solve_steady_state(const SystemConfig& sys, const DriveConfig& drive) {
    validate(sys);
    validate(drive);
    if (drive.delta != 0.0 && drive.mu > 1.0) {
        throw Error(ErrorKind::DetunedAboveThreshold, "the above-threshold state with detuning is not modeled");
    }
    constexpr std::complex<double> I{0.0, 1.0};
    const double a_cr = critical_pump_amplitude(sys);
    SteadyState st;
    st.mu = drive.mu;
    st.regime = classify(drive.mu);
    if (st.regime != Regime::Above) {
        st.a_s = I * (drive.mu * a_cr) * std::polar(1.0, drive.phi_s);
        return st;
    }
    st.a_s = I * a_cr * std::polar(1.0, drive.phi_s);
    const auto half_phase = std::polar(1.0, 0.5 * drive.phi_s);
    st.a_i = I * membrane_amplitude(sys, Membrane::I, drive.mu) * half_phase;
    st.a_j = I * membrane_amplitude(sys, Membrane::J, drive.mu) * half_phase;
    return st;
}

/// Relative residuals of the three noise-free right-hand sides at a state.
/// Each bracket is divided by the largest magnitude among its own terms.
[[nodiscard]] inline std::array<double, 3> steady_state_residuals(const SystemConfig& sys, const DriveConfig& drive,
                                                                  const SteadyState& st) {
    constexpr std::complex<double> I{0.0, 1.0};
    const double chi_i = susceptibility(sys.mode_i);
    const double chi_j = susceptibility(sys.mode_j);
    const double chi_s = susceptibility(sys.mode_s);
    const auto drive_term = I * (drive.mu * critical_pump_amplitude(sys)) * std::polar(1.0, drive.phi_s);

    auto rel = [](std::complex<double> lin, std::complex<double> nl, std::complex<double> src) {
        const double scale = std::max({std::abs(lin), std::abs(nl), std::abs(src)});
        const auto sum = lin + nl + src;
        return scale > 0.0 ? std::abs(sum) / scale : 0.0;
    };
    return {
        rel(-st.a_i, I * (0.5 * sys.g * chi_i) * std::conj(st.a_j) * st.a_s, 0.0),
        rel(-st.a_j, I * (0.5 * sys.g * chi_j) * std::conj(st.a_i) * st.a_s, 0.0),
        rel(-st.a_s, I * (0.5 * sys.g * chi_s) * st.a_i * st.a_j, drive_term),
    };
}

}  // namespace ndpa
