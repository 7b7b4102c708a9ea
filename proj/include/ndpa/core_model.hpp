#pragma once

// Domain records for the three-mode (signal i, idler j, substrate pump S)
// parametric system and the parameter derivations everything else uses.
// SI units throughout; angular frequencies in rad/s.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ndpa/error.hpp"

namespace ndpa {

/// Boltzmann constant (exact SI value).
inline constexpr double kBoltzmannSI = 1.380649e-23;

/// One mechanical mode. Use make_mode() to get a validated instance.
struct ModeParams {
    double omega = 0.0;  ///< angular eigenfrequency (rad/s)
    double gamma = 0.0;  ///< energy decay linewidth (rad/s)
    double mass = 0.0;   ///< effective mass (kg)

    [[nodiscard]] double quality_factor() const { return omega / gamma; }
};

inline void validate(const ModeParams& m, const std::string& name = "mode") {
    auto positive = [&](double v, const char* field) {
        if (!(std::isfinite(v) && v > 0.0)) {
            throw Error(ErrorKind::InvalidParameter,
                        name + "." + field + " must be finite and > 0 (got " + std::to_string(v) + ")");
        }
    };
    positive(m.omega, "omega");
    positive(m.gamma, "gamma");
    positive(m.mass, "mass");
    if (!(m.quality_factor() > 1.0)) {
        throw Error(ErrorKind::InvalidParameter, name + ": quality factor omega/gamma must exceed 1");
    }
}

inline ModeParams make_mode(double omega, double gamma, double mass, const std::string& name = "mode") {
    ModeParams m{omega, gamma, mass};
    validate(m, name);
    return m;
}

/// Three modes plus the two-mode coupling and the bath.
struct SystemConfig {
    ModeParams mode_i;
    ModeParams mode_j;
    ModeParams mode_s;
    double g = 0.0;            ///< coupling (N/m^2)
    double temperature = 0.0;  ///< bath temperature (K)
    double k_b = kBoltzmannSI;
    /// Minimum gamma_S / max(gamma_i, gamma_j) before the pump may be eliminated.
    double elimination_guard = 100.0;
    /// Minimum gamma_S / |Delta| for the detuned (instantaneous pump) analytics.
    double detuning_guard = 10.0;
};

inline void validate(const SystemConfig& s) {
    validate(s.mode_i, "modes.i");
    validate(s.mode_j, "modes.j");
    validate(s.mode_s, "modes.s");
    if (!(std::isfinite(s.g) && s.g > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "coupling.g must be finite and > 0");
    }
    if (!(std::isfinite(s.temperature) && s.temperature >= 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "bath.temperature_k must be finite and >= 0");
    }
    if (!(std::isfinite(s.k_b) && s.k_b > 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "k_b must be finite and > 0");
    }
    const double sum = s.mode_i.omega + s.mode_j.omega;
    if (std::abs(s.mode_s.omega - sum) > 1e-12 * sum) {
        throw Error(ErrorKind::InvalidParameter,
                    "substrate frequency must equal omega_i + omega_j; drive offsets belong in the detuning");
    }
    if (!(s.elimination_guard >= 1.0) || !(s.detuning_guard >= 1.0)) {
        throw Error(ErrorKind::InvalidParameter, "guard ratios must be >= 1");
    }
}

/// Builds a system whose substrate sits exactly at omega_i + omega_j.
inline SystemConfig make_system(const ModeParams& mode_i, const ModeParams& mode_j, double gamma_s,
                                double mass_s, double g, double temperature, double k_b = kBoltzmannSI) {
    SystemConfig s;
    s.mode_i = mode_i;
    s.mode_j = mode_j;
    s.mode_s = ModeParams{mode_i.omega + mode_j.omega, gamma_s, mass_s};
    s.g = g;
    s.temperature = temperature;
    s.k_b = k_b;
    validate(s);
    return s;
}

/// Pump drive: normalized strength, force phase and detuning from omega_S.
struct DriveConfig {
    double mu = 0.0;
    double phi_s = 0.0;
    double delta = 0.0;  ///< rad/s
};

inline void validate(const DriveConfig& d) {
    if (!(std::isfinite(d.mu) && d.mu >= 0.0)) {
        throw Error(ErrorKind::InvalidParameter, "drive mu must be finite and >= 0");
    }
    if (!std::isfinite(d.phi_s) || !std::isfinite(d.delta)) {
        throw Error(ErrorKind::InvalidParameter, "drive phase and detuning must be finite");
    }
}

/// Requires |delta| * detuning_guard <= gamma_S, the regime where the pump
/// follows the drive through its on-resonance susceptibility.
inline void check_detuning(const SystemConfig& sys, const DriveConfig& drive) {
    if (std::abs(drive.delta) * sys.detuning_guard > sys.mode_s.gamma) {
        throw Error(ErrorKind::PumpDetuningTooLarge,
                    "|delta| must be << gamma_S (ratio guard " + std::to_string(sys.detuning_guard) + ")");
    }
}

struct AsymmetryParams {
    double delta_gamma = 0.0;  ///< (gamma_i - gamma_j) / (gamma_i + gamma_j)
    double delta_omega = 0.0;  ///< (omega_i - omega_j) / (omega_i + omega_j)
};

inline void validate(const AsymmetryParams& a) {
    if (!(std::abs(a.delta_gamma) < 1.0) || !(std::abs(a.delta_omega) < 1.0)) {
        throw Error(ErrorKind::InvalidParameter, "asymmetry parameters must lie in (-1, 1)");
    }
}

/// On-resonance susceptibility magnitude 1/(m omega gamma), in m/N.
[[nodiscard]] inline double susceptibility(const ModeParams& m) { return 1.0 / (m.mass * m.omega * m.gamma); }

/// Coupling rate g/(2 m omega); equal to g gamma chi / 2.
[[nodiscard]] inline double kappa(const ModeParams& m, double g) { return g / (2.0 * m.mass * m.omega); }

[[nodiscard]] inline AsymmetryParams asymmetry(const ModeParams& mode_i, const ModeParams& mode_j) {
    return {(mode_i.gamma - mode_j.gamma) / (mode_i.gamma + mode_j.gamma),
            (mode_i.omega - mode_j.omega) / (mode_i.omega + mode_j.omega)};
}

/// Thermal displacement variance k_B T / (m omega^2); the unit every
/// reported variance is normalized by.
[[nodiscard]] inline double thermal_variance(const ModeParams& m, double temperature, double k_b = kBoltzmannSI) {
    return k_b * temperature / (m.mass * m.omega * m.omega);
}

/// Inverse of asymmetry(): a pair of modes with given mean linewidth and
/// frequency and the requested asymmetries.
struct ModePair {
    ModeParams mode_i;
    ModeParams mode_j;
};

[[nodiscard]] inline ModePair modes_from_asymmetry(double mean_gamma, double mean_omega, const AsymmetryParams& asym,
                                                   double mass_i = 1.0, double mass_j = 1.0) {
    validate(asym);
    ModePair p;
    p.mode_i = make_mode(mean_omega * (1.0 + asym.delta_omega), mean_gamma * (1.0 + asym.delta_gamma), mass_i,
                         "modes.i");
    p.mode_j = make_mode(mean_omega * (1.0 - asym.delta_omega), mean_gamma * (1.0 - asym.delta_gamma), mass_j,
                         "modes.j");
    return p;
}

/// Convenience: a complete system built from mean parameters and asymmetries.
/// The substrate linewidth is pump_ratio times the larger membrane linewidth.
[[nodiscard]] inline SystemConfig reference_system(double mean_gamma, double mean_omega, const AsymmetryParams& asym,
                                                   double pump_ratio = 1e3, double mass_s = 1.0, double g = 1.0,
                                                   double temperature = 1.0, double k_b = 1.0) {
    auto pair = modes_from_asymmetry(mean_gamma, mean_omega, asym);
    const double gmax = std::max(pair.mode_i.gamma, pair.mode_j.gamma);
    return make_system(pair.mode_i, pair.mode_j, pump_ratio * gmax, mass_s, g, temperature, k_b);
}

}  // namespace ndpa
