#pragma once

// One-dimensional parameter sweeps over the engine. Each grid point gets a
// row; points outside the valid domain are kept and carry a status instead
// of values, so tables stay rectangular across thresholds.

#include <limits>
#include <string>
#include <vector>

#include "ndpa/closed_form.hpp"
#include "ndpa/error.hpp"
#include "ndpa/figures.hpp"
#include "ndpa/fluctuation.hpp"
#include "ndpa/serialize.hpp"

namespace ndpa {

enum class SweepAxis { Mu, DeltaGamma, DeltaOmega, Delta, TauM };
enum class Spacing { Linear, Log };

[[nodiscard]] inline const char* to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::Mu: return "mu";
        case SweepAxis::DeltaGamma: return "delta_gamma";
        case SweepAxis::DeltaOmega: return "delta_omega";
        case SweepAxis::Delta: return "delta";
        case SweepAxis::TauM: return "tau_m";
    }
    return "?";
}

[[nodiscard]] inline SweepAxis parse_axis(const std::string& s) {
    for (auto a : {SweepAxis::Mu, SweepAxis::DeltaGamma, SweepAxis::DeltaOmega, SweepAxis::Delta, SweepAxis::TauM}) {
        if (s == to_string(a)) return a;
    }
    throw Error(ErrorKind::InvalidRange, "unknown sweep axis '" + s + "'");
}

/// `delta` is in units of the mean membrane linewidth; `tau_m` in seconds,
/// with 0 meaning the full band.
struct SweepSpec {
    SweepAxis axis = SweepAxis::Mu;
    double start = 0.0;
    double stop = 0.99;
    int points = 100;
    Spacing spacing = Spacing::Linear;
    double mu = 0.0;
    double delta_gamma = 0.0;
    double delta_omega = 0.0;
    double delta = 0.0;
    double tau_m = 0.0;
};

inline void validate(const SweepSpec& s) {
    if (s.points < 2) throw Error(ErrorKind::InvalidRange, "a sweep needs at least 2 points");
    if (!std::isfinite(s.start) || !std::isfinite(s.stop)) throw Error(ErrorKind::InvalidRange, "non-finite bounds");
    if (s.spacing == Spacing::Log && !(s.start > 0.0 && s.stop > 0.0)) {
        throw Error(ErrorKind::InvalidRange, "log spacing needs positive bounds");
    }
    if (s.axis == SweepAxis::TauM && !(s.start > 0.0 && s.stop > 0.0)) {
        throw Error(ErrorKind::InvalidRange, "tau_m must be > 0");
    }
    if (s.axis == SweepAxis::Mu && (s.start < 0.0 || s.stop < 0.0)) {
        throw Error(ErrorKind::InvalidRange, "mu must be >= 0");
    }
    if (!(s.tau_m >= 0.0)) throw Error(ErrorKind::InvalidRange, "tau_m must be >= 0");
}

namespace detail {

struct SweepPoint {
    double mu, delta_gamma, delta_omega, delta, tau_m;
};

inline constexpr const char* kSweepLabels[] = {"x+", "x-", "y+", "y-"};

}  // namespace detail

[[nodiscard]] inline Table run_sweep(const SystemConfig& base, const SweepSpec& spec) {
    validate(spec);
    const auto grid = spec.spacing == Spacing::Log ? logspace(spec.start, spec.stop, spec.points)
                                                   : linspace(spec.start, spec.stop, spec.points);
    Table t;
    t.name = std::string("sweep-") + to_string(spec.axis);
    t.add_meta("axis", to_string(spec.axis));
    t.add_meta("spacing", spec.spacing == Spacing::Log ? "log" : "linear");
    t.columns = {"mu", "delta_gamma", "delta_omega", "delta_over_gamma", "tau_m",
                 "x_plus", "x_minus", "y_plus", "y_minus", "xy_plus", "xy_minus", "status"};
    if (spec.axis == SweepAxis::Delta) {
        t.columns.insert(t.columns.end(), {"peak_squeezed", "peak_squeezed_closed_form"});
    }
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    for (double v : grid) {
        detail::SweepPoint p{spec.mu, spec.delta_gamma, spec.delta_omega, spec.delta, spec.tau_m};
        switch (spec.axis) {
            case SweepAxis::Mu: p.mu = v; break;
            case SweepAxis::DeltaGamma: p.delta_gamma = v; break;
            case SweepAxis::DeltaOmega: p.delta_omega = v; break;
            case SweepAxis::Delta: p.delta = v; break;
            case SweepAxis::TauM: p.tau_m = v; break;
        }
        std::vector<Table::Cell> row{p.mu, p.delta_gamma, p.delta_omega, p.delta, p.tau_m};
        std::vector<double> vals(6, nan);
        std::string status = "ok";
        double peak = nan;
        double peak_cf = nan;
        try {
            const SystemConfig sys = with_asymmetry(base, {p.delta_gamma, p.delta_omega});
            const double gamma = 0.5 * (sys.mode_i.gamma + sys.mode_j.gamma);
            const Band band = p.tau_m > 0.0 ? Band::measurement_time(p.tau_m) : Band::full();
            CovarianceReport rep;
            if (p.delta != 0.0) {
                rep = variance_integral(build_detuned(sys, {p.mu, 0.0, p.delta * gamma}), band);
            } else {
                rep = engine_covariance(sys, p.mu, band);
            }
            for (int k = 0; k < 4; ++k) vals[k] = rep.var(detail::kSweepLabels[k]);
            vals[4] = rep.at("x+", "y+");
            vals[5] = rep.at("x-", "y-");
            for (double x : vals) {
                if (std::isinf(x)) status = "divergent";
            }
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::InvalidParameter || e.kind() == ErrorKind::ParseError) throw;
            status = std::string(to_string(e.kind()));
        }
        if (spec.axis == SweepAxis::Delta) {
            try {
                const SystemConfig sys = with_asymmetry(base, {p.delta_gamma, p.delta_omega});
                const double gamma = 0.5 * (sys.mode_i.gamma + sys.mode_j.gamma);
                peak = detail::detuned_peak_numeric(sys, p.delta * gamma).second;
                peak_cf = closed_form::detuned_peak_squeezing(p.delta * gamma, gamma);
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::InvalidParameter || e.kind() == ErrorKind::ParseError) throw;
            }
        }
        for (double x : vals) row.emplace_back(x);
        row.emplace_back(status);
        if (spec.axis == SweepAxis::Delta) {
            row.emplace_back(peak);
            row.emplace_back(peak_cf);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace ndpa
