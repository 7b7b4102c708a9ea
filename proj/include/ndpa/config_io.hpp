#pragma once

// JSON configuration loader.
//
//   {
//     "modes": {
//       "i": {"omega_hz": 1000.0, "q_factor": 1e4, "mass_kg": 1.0},
//       "j": {"omega_hz": 1000.0, "gamma_hz": 0.1, "mass_kg": 1.0},
//       "s": {"gamma_hz": 100.0, "mass_kg": 1.0}
//     },
//     "coupling": {"g": 1.0},
//     "bath": {"temperature_k": 300.0, "k_b": 1.380649e-23},
//     "guards": {"elimination": 100, "detuning": 10}
//   }
//
// Frequencies and linewidths are ordinary frequencies (Hz) and are multiplied
// by 2*pi. modes.s.omega_hz may be omitted; if present it must equal the sum
// of the membrane frequencies.

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ndpa/core_model.hpp"
#include "ndpa/error.hpp"

namespace ndpa {

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& node, const char* key, const std::string& path) {
    if (!node.is_object() || !node.contains(key)) {
        throw Error(ErrorKind::ParseError, "missing key '" + path + key + "'");
    }
    return node.at(key);
}

inline double number(const nlohmann::json& node, const char* key, const std::string& path) {
    const auto& v = require(node, key, path);
    if (!v.is_number()) {
        throw Error(ErrorKind::ParseError, "'" + path + key + "' must be a number");
    }
    return v.get<double>();
}

inline ModeParams parse_mode(const nlohmann::json& node, const std::string& path, double omega) {
    const bool has_q = node.contains("q_factor");
    const bool has_gamma = node.contains("gamma_hz");
    if (has_q == has_gamma) {
        throw Error(ErrorKind::ParseError, "'" + path + "' needs exactly one of q_factor or gamma_hz");
    }
    const double gamma = has_q ? omega / number(node, "q_factor", path)
                               : 2.0 * std::numbers::pi * number(node, "gamma_hz", path);
    return ModeParams{omega, gamma, number(node, "mass_kg", path)};
}

}  // namespace detail

[[nodiscard]] inline SystemConfig parse_config(const nlohmann::json& root) {
    using detail::number;
    using detail::require;
    constexpr double two_pi = 2.0 * std::numbers::pi;

    const auto& modes = require(root, "modes", "");
    const auto& ni = require(modes, "i", "modes.");
    const auto& nj = require(modes, "j", "modes.");
    const auto& ns = require(modes, "s", "modes.");

    SystemConfig sys;
    sys.mode_i = detail::parse_mode(ni, "modes.i.", two_pi * number(ni, "omega_hz", "modes.i."));
    sys.mode_j = detail::parse_mode(nj, "modes.j.", two_pi * number(nj, "omega_hz", "modes.j."));
    const double omega_s = sys.mode_i.omega + sys.mode_j.omega;
    if (ns.contains("omega_hz")) {
        const double given = two_pi * number(ns, "omega_hz", "modes.s.");
        if (std::abs(given - omega_s) > 1e-9 * omega_s) {
            throw Error(ErrorKind::InvalidParameter,
                        "modes.s.omega_hz must equal modes.i.omega_hz + modes.j.omega_hz");
        }
    }
    sys.mode_s = detail::parse_mode(ns, "modes.s.", omega_s);
    sys.g = number(require(root, "coupling", ""), "g", "coupling.");
    const auto& bath = require(root, "bath", "");
    sys.temperature = number(bath, "temperature_k", "bath.");
    if (bath.contains("k_b")) sys.k_b = number(bath, "k_b", "bath.");
    if (root.contains("guards")) {
        const auto& guards = root.at("guards");
        if (guards.contains("elimination")) sys.elimination_guard = number(guards, "elimination", "guards.");
        if (guards.contains("detuning")) sys.detuning_guard = number(guards, "detuning", "guards.");
    }
    validate(sys);
    return sys;
}

[[nodiscard]] inline SystemConfig parse_config_text(const std::string& text) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
    return parse_config(root);
}

[[nodiscard]] inline SystemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

[[nodiscard]] inline nlohmann::json to_json(const SystemConfig& sys) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    auto mode = [&](const ModeParams& m) {
        return nlohmann::json{{"omega_hz", m.omega / two_pi}, {"gamma_hz", m.gamma / two_pi}, {"mass_kg", m.mass}};
    };
    return nlohmann::json{
        {"modes", {{"i", mode(sys.mode_i)}, {"j", mode(sys.mode_j)}, {"s", mode(sys.mode_s)}}},
        {"coupling", {{"g", sys.g}}},
        {"bath", {{"temperature_k", sys.temperature}, {"k_b", sys.k_b}}},
        {"guards", {{"elimination", sys.elimination_guard}, {"detuning", sys.detuning_guard}}},
    };
}

}  // namespace ndpa
