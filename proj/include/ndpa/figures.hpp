#pragma once

// Tabulated data for each standard plot. Parameter values come from
// the "figures" section of data/presets.json.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "ndpa/closed_form.hpp"
#include "ndpa/core_model.hpp"
#include "ndpa/error.hpp"
#include "ndpa/fluctuation.hpp"
#include "ndpa/serialize.hpp"
#include "ndpa/steady_state.hpp"

namespace ndpa {

[[nodiscard]] inline std::vector<double> linspace(double start, double stop, int points) {
    if (points < 2) throw Error(ErrorKind::InvalidRange, "need at least 2 points");
    std::vector<double> out(points);
    for (int k = 0; k < points; ++k) out[k] = start + (stop - start) * k / (points - 1);
    return out;
}

[[nodiscard]] inline std::vector<double> logspace(double start, double stop, int points) {
    if (!(start > 0.0) || !(stop > 0.0)) throw Error(ErrorKind::InvalidRange, "log spacing needs positive bounds");
    std::vector<double> out = linspace(std::log(start), std::log(stop), points);
    for (auto& v : out) v = std::exp(v);
    out.front() = start;
    out.back() = stop;
    return out;
}

/// Same substrate, coupling and bath, with the membrane pair rebuilt around
/// its mean linewidth (optionally overridden) and mean frequency.
[[nodiscard]] inline SystemConfig with_asymmetry(const SystemConfig& base, const AsymmetryParams& asym,
                                                 double mean_gamma = 0.0) {
    const double g = mean_gamma > 0.0 ? mean_gamma : 0.5 * (base.mode_i.gamma + base.mode_j.gamma);
    const double w = 0.5 * (base.mode_i.omega + base.mode_j.omega);
    const ModePair pair = modes_from_asymmetry(g, w, asym, base.mode_i.mass, base.mode_j.mass);
    SystemConfig out = make_system(pair.mode_i, pair.mode_j, base.mode_s.gamma, base.mode_s.mass, base.g,
                                   base.temperature, base.k_b);
    out.elimination_guard = base.elimination_guard;
    out.detuning_guard = base.detuning_guard;
    return out;
}

/// Collective covariance from the engine for any resonant drive: below (or
/// at) threshold uses the full model, above threshold the pump is eliminated.
[[nodiscard]] inline CovarianceReport engine_covariance(const SystemConfig& sys, double mu,
                                                        const Band& band = Band::full()) {
    const DriveConfig d{mu, 0.0, 0.0};
    return variance_integral(mu <= 1.0 ? build_below(sys, d) : build_above(sys, d, true), band);
}

namespace detail {

inline double num(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        throw Error(ErrorKind::ParseError, std::string("preset is missing numeric '") + key + "'");
    }
    return j.at(key).get<double>();
}

inline std::vector<double> grid(const nlohmann::json& p) {
    return linspace(num(p, "mu_start"), num(p, "mu_stop"), static_cast<int>(num(p, "points")));
}

inline AsymmetryParams asym_of(const nlohmann::json& p) { return {num(p, "delta_gamma"), num(p, "delta_omega")}; }

inline Table amplitudes(const SystemConfig& sys, const nlohmann::json& p) {
    Table t;
    t.name = "amplitudes";
    t.add_meta("critical_pump_amplitude_m", critical_pump_amplitude(sys));
    t.columns = {"mu", "a_s", "a_i", "a_j", "a_s_over_critical", "regime"};
    for (double mu : grid(p)) {
        const SteadyState st = solve_steady_state(sys, {mu, 0.0, 0.0});
        t.rows.push_back({mu, std::abs(st.a_s), std::abs(st.a_i), std::abs(st.a_j),
                          std::abs(st.a_s) / critical_pump_amplitude(sys), std::string(to_string(st.regime))});
    }
    return t;
}

inline Table below_variances(const nlohmann::json& p) {
    const AsymmetryParams a = asym_of(p);
    Table t;
    t.name = "below-variances";
    t.add_meta("delta_gamma", a.delta_gamma);
    t.add_meta("delta_omega", a.delta_omega);
    t.columns = {"mu", "matched_squeezed", "matched_amplified", "y_plus", "y_minus", "y_cross"};
    for (double mu : grid(p)) {
        const auto m = closed_form::below_matched_variance(mu);
        const auto v = closed_form::below_mismatched_variance(mu, a);
        t.rows.push_back({mu, m.x_plus, m.x_minus, v.y_plus, v.y_minus, v.cross});
    }
    return t;
}

inline Table peak_map(const nlohmann::json& p) {
    Table t;
    t.name = "peak-squeezing-map";
    t.columns = {"delta_gamma", "delta_omega", "mu_star", "sigma_star"};
    const auto axis = linspace(num(p, "start"), num(p, "stop"), static_cast<int>(num(p, "points")));
    for (double dg : axis) {
        for (double dw : axis) {
            const auto pk = closed_form::peak_squeezing({dg, dw});
            t.rows.push_back({dg, dw, pk.mu, pk.sigma});
        }
    }
    return t;
}

/// Minimum over mu of the engine's sigma_{x+} at fixed detuning.
inline std::pair<double, double> detuned_peak_numeric(const SystemConfig& sys, double delta) {
    const double gamma = sys.mode_i.gamma;
    const double top = detuned_threshold(gamma, delta) * (1.0 - 1e-7);
    auto f = [&](double mu) { return variance_lyapunov(build_detuned(sys, {mu, 0.0, delta})).var("x+"); };
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 0.0, hi = top;
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    while (hi - lo > 1e-9 * top) {
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
    double mu = 0.5 * (lo + hi);
    if (f(top) < f(mu)) mu = top;
    return {mu, f(mu)};
}

inline std::vector<Table> detuning(const SystemConfig& base, const nlohmann::json& p) {
    const SystemConfig sys = with_asymmetry(base, {0.0, 0.0});
    const double gamma = sys.mode_i.gamma;
    Table var;
    var.name = "detuning-variances";
    var.columns = {"delta_over_gamma", "mu", "x_plus", "x_minus", "xy_plus", "xy_minus", "threshold"};
    const int points = static_cast<int>(num(p, "points"));
    for (const auto& r : p.at("detunings_over_gamma")) {
        const double ratio = r.get<double>();
        const double th = detuned_threshold(gamma, ratio * gamma);
        for (double mu : linspace(0.0, th * (1.0 - 1e-3), points)) {
            const auto v = closed_form::detuned_variances(mu, ratio * gamma, gamma);
            var.rows.push_back({ratio, mu, v.x_plus, v.x_minus, v.xy_plus, v.xy_minus, th});
        }
    }
    Table peak;
    peak.name = "detuning-peak";
    peak.columns = {"delta_over_gamma", "peak_squeezed", "peak_squeezed_engine", "mu_at_peak", "threshold"};
    for (double ratio :
         linspace(num(p, "peak_start"), num(p, "peak_stop"), static_cast<int>(num(p, "peak_points")))) {
        const auto [mu, sigma] = detuned_peak_numeric(sys, ratio * gamma);
        peak.rows.push_back({ratio, closed_form::detuned_peak_squeezing(ratio * gamma, gamma), sigma, mu,
                             detuned_threshold(gamma, ratio * gamma)});
    }
    return {var, peak};
}

inline Table above_variances(const SystemConfig& base, const nlohmann::json& p) {
    const AsymmetryParams a = asym_of(p);
    const SystemConfig sys = with_asymmetry(base, a);
    Table t;
    t.name = "above-variances";
    t.add_meta("delta_gamma", a.delta_gamma);
    t.add_meta("delta_omega", a.delta_omega);
    t.columns = {"mu", "matched_y_plus", "matched_y_minus", "y_plus", "y_minus"};
    for (double mu : grid(p)) {
        const auto m = closed_form::above_matched(mu);
        const auto rep = engine_covariance(sys, mu);
        t.rows.push_back({mu, m.y_plus, m.y_minus, rep.var("y+"), rep.var("y-")});
    }
    return t;
}

inline Table crossover(const SystemConfig& base, const nlohmann::json& p) {
    const AsymmetryParams a = asym_of(p);
    const SystemConfig sys = with_asymmetry(base, a);
    const SystemConfig matched = with_asymmetry(base, {0.0, 0.0});
    Table t;
    t.name = "crossover";
    t.add_meta("delta_gamma", a.delta_gamma);
    t.add_meta("delta_omega", a.delta_omega);
    t.columns = {"mu", "y_plus", "y_minus", "matched_y_plus", "matched_y_minus"};
    for (double mu : grid(p)) {
        const auto rep = engine_covariance(sys, mu);
        const auto mrep = engine_covariance(matched, mu);
        t.rows.push_back({mu, rep.var("y+"), rep.var("y-"), mrep.var("y+"), mrep.var("y-")});
    }
    return t;
}

inline Table finite_time(const SystemConfig& base, const nlohmann::json& p) {
    const AsymmetryParams a = asym_of(p);
    const double gamma = 2.0 * std::numbers::pi * num(p, "gamma_hz");
    const double tau = num(p, "tau_m_s");
    const SystemConfig sys = with_asymmetry(base, a, gamma);
    Table t;
    t.name = "finite-time";
    t.add_meta("delta_gamma", a.delta_gamma);
    t.add_meta("delta_omega", a.delta_omega);
    t.add_meta("gamma_rad_s", gamma);
    t.add_meta("tau_m_s", tau);
    t.columns = {"mu", "y_plus_finite", "y_minus_finite", "y_plus_steady", "y_minus_steady"};
    for (double mu : grid(p)) {
        const auto fin = engine_covariance(sys, mu, Band::measurement_time(tau));
        const auto ss = engine_covariance(sys, mu);
        t.rows.push_back({mu, fin.var("y+"), fin.var("y-"), ss.var("y+"), ss.var("y-")});
    }
    return t;
}

}  // namespace detail

[[nodiscard]] inline const std::vector<std::string>& figure_names() {
    static const std::vector<std::string> names = {"amplitudes", "below-variances", "peak-squeezing-map", "detuning",
                                                   "above-variances", "crossover", "finite-time"};
    return names;
}

/// Tables for one figure. `figures` is the presets' "figures" object.
[[nodiscard]] inline std::vector<Table> make_figure(const std::string& name, const SystemConfig& sys,
                                                    const nlohmann::json& figures) {
    if (std::find(figure_names().begin(), figure_names().end(), name) == figure_names().end()) {
        throw Error(ErrorKind::UnknownFigure, "unknown figure '" + name + "'");
    }
    if (!figures.contains(name)) throw Error(ErrorKind::ParseError, "presets lack figure '" + name + "'");
    const auto& p = figures.at(name);
    if (name == "amplitudes") return {detail::amplitudes(sys, p)};
    if (name == "below-variances") return {detail::below_variances(p)};
    if (name == "peak-squeezing-map") return {detail::peak_map(p)};
    if (name == "detuning") return detail::detuning(sys, p);
    if (name == "above-variances") return {detail::above_variances(sys, p)};
    if (name == "crossover") return {detail::crossover(sys, p)};
    return {detail::finite_time(sys, p)};
}

}  // namespace ndpa
