#pragma once

// Versioned presets file holding the default system and per-figure
// parameters. Lookup order: explicit path, $NDPA_PRESETS, then the data
// directory compiled into the build.

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ndpa/config_io.hpp"
#include "ndpa/error.hpp"

#ifndef NDPA_DATA_DIR
#define NDPA_DATA_DIR "data"
#endif

namespace ndpa {

inline constexpr int kPresetsVersion = 1;

struct Presets {
    nlohmann::json root;
    std::string path;

    [[nodiscard]] SystemConfig system() const { return parse_config(root.at("system")); }
    [[nodiscard]] const nlohmann::json& figures() const { return root.at("figures"); }
};

[[nodiscard]] inline std::string default_presets_path() {
    if (const char* env = std::getenv("NDPA_PRESETS"); env && *env) return env;
    return std::string(NDPA_DATA_DIR) + "/presets.json";
}

[[nodiscard]] inline Presets load_presets(const std::string& explicit_path = {}) {
    Presets p;
    p.path = explicit_path.empty() ? default_presets_path() : explicit_path;
    std::ifstream in(p.path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open presets file '" + p.path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        p.root = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::ParseError, std::string("presets: ") + e.what());
    }
    if (!p.root.contains("version") || p.root.at("version") != kPresetsVersion) {
        throw Error(ErrorKind::ParseError, "presets version must be " + std::to_string(kPresetsVersion));
    }
    if (!p.root.contains("system") || !p.root.contains("figures")) {
        throw Error(ErrorKind::ParseError, "presets need 'system' and 'figures' sections");
    }
    return p;
}

}  // namespace ndpa
