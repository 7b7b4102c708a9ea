#pragma once

// CSV and JSON emitters. CSV files start with '#' comment lines, the first
// of which carries the schema version; numbers use the shortest decimal
// form that round-trips and non-finite values are written as inf/-inf/nan.

#include <charconv>
#include <cmath>
#include <ostream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ndpa/fluctuation.hpp"
#include "ndpa/langevin.hpp"

namespace ndpa {

inline constexpr int kCsvSchemaVersion = 1;

[[nodiscard]] inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// JSON value for a double: a number, or the strings "inf"/"-inf"/"nan".
[[nodiscard]] inline nlohmann::json json_number(double v) {
    if (std::isfinite(v)) return v;
    return format_number(v);
}

/// One table of named columns; the unit of output for figures and sweeps.
struct Table {
    std::string name;
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::string> columns;
    using Cell = std::variant<double, std::string>;
    std::vector<std::vector<Cell>> rows;

    void add_meta(const std::string& key, const std::string& value) { meta.emplace_back(key, value); }
    void add_meta(const std::string& key, double value) { meta.emplace_back(key, format_number(value)); }
};

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string cell_text(const Table::Cell& c) {
    if (const double* d = std::get_if<double>(&c)) return format_number(*d);
    return csv_field(std::get<std::string>(c));
}

}  // namespace detail

inline void write_csv(std::ostream& out, const Table& t) {
    out << "# ndpa-csv-schema: " << kCsvSchemaVersion << "\n";
    out << "# table: " << t.name << "\n";
    for (const auto& [k, v] : t.meta) out << "# " << k << ": " << v << "\n";
    for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << detail::csv_field(t.columns[c]);
    out << "\n";
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << detail::cell_text(row[c]);
        out << "\n";
    }
}

[[nodiscard]] inline nlohmann::json to_json(const Table& t) {
    nlohmann::json meta = nlohmann::json::object();
    for (const auto& [k, v] : t.meta) meta[k] = v;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : t.rows) {
        nlohmann::json r = nlohmann::json::object();
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (const double* d = std::get_if<double>(&row[c])) {
                r[t.columns[c]] = json_number(*d);
            } else {
                r[t.columns[c]] = std::get<std::string>(row[c]);
            }
        }
        rows.push_back(std::move(r));
    }
    return {{"schema", kCsvSchemaVersion}, {"table", t.name}, {"meta", meta}, {"columns", t.columns}, {"rows", rows}};
}

/// Long format: omega, row, col, re, im.
[[nodiscard]] inline Table spectrum_table(const SpectrumSeries& s) {
    Table t;
    t.name = "spectrum";
    t.add_meta("units", "normalized variance per rad/s");
    t.columns = {"omega", "row", "col", "re", "im"};
    for (std::size_t k = 0; k < s.frequencies.size(); ++k) {
        const auto& m = s.values[k];
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                t.rows.push_back({s.frequencies[k], s.labels[r], s.labels[c], m(r, c).real(), m(r, c).imag()});
    }
    return t;
}

/// Long format: row, col, value, divergent; divergent values are inf.
[[nodiscard]] inline Table covariance_table(const CovarianceReport& rep) {
    Table t;
    t.name = "covariance";
    t.add_meta("method", to_string(rep.method));
    if (rep.method == CovarianceMethod::FiniteTime) t.add_meta("tau_m", rep.tau_m);
    t.columns = {"row", "col", "value", "divergent"};
    for (Eigen::Index r = 0; r < rep.sigma.rows(); ++r) {
        for (Eigen::Index c = 0; c < rep.sigma.cols(); ++c) {
            const bool div = rep.divergent.size() != 0 && rep.divergent(r, c);
            t.rows.push_back({rep.labels[r], rep.labels[c], rep.sigma(r, c), std::string(div ? "1" : "0")});
        }
    }
    return t;
}

[[nodiscard]] inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(json_number(m(r, c)));
        out.push_back(std::move(row));
    }
    return out;
}

[[nodiscard]] inline nlohmann::json to_json(const CovarianceReport& rep) {
    nlohmann::json j = {{"labels", rep.labels}, {"method", to_string(rep.method)}, {"sigma", matrix_json(rep.sigma)}};
    if (rep.method == CovarianceMethod::FiniteTime) j["tau_m"] = rep.tau_m;
    nlohmann::json flags = nlohmann::json::array();
    for (Eigen::Index r = 0; r < rep.sigma.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < rep.sigma.cols(); ++c)
            row.push_back(rep.divergent.size() != 0 && rep.divergent(r, c));
        flags.push_back(std::move(row));
    }
    j["divergent"] = std::move(flags);
    return j;
}

[[nodiscard]] inline nlohmann::json to_json(const SpectrumSeries& s) {
    nlohmann::json values = nlohmann::json::array();
    for (const auto& m : s.values) values.push_back({{"re", matrix_json(m.real())}, {"im", matrix_json(m.imag())}});
    return {{"labels", s.labels}, {"frequencies", s.frequencies}, {"values", values}};
}

[[nodiscard]] inline nlohmann::json to_json(const EnsembleStats& st) {
    nlohmann::json j = {
        {"labels", st.labels},
        {"n_traj", st.n_traj},
        {"samples_per_traj", st.samples_per_traj},
        {"seed", st.seed},
        {"mean_amplitude", st.mean_amplitude},
        {"mean_amplitude_se", st.mean_amplitude_se},
        {"covariance", matrix_json(st.covariance)},
        {"standard_error", matrix_json(st.standard_error)},
    };
    if (st.spectrum) {
        nlohmann::json diag = nlohmann::json::array();
        for (std::size_t k = 0; k < st.spectrum->frequencies.size(); ++k) {
            const Eigen::VectorXd d = st.spectrum->values[k].diagonal().real();
            diag.push_back({{"omega", st.spectrum->frequencies[k]},
                            {"psd", std::vector<double>(d.data(), d.data() + d.size())},
                            {"se", std::vector<double>(st.spectrum_se[k].data(),
                                                       st.spectrum_se[k].data() + st.spectrum_se[k].size())}});
        }
        j["spectrum"] = std::move(diag);
    }
    return j;
}

[[nodiscard]] inline nlohmann::json to_json(const ComparisonVerdict& v) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : v.entries) {
        entries.push_back({{"row", e.row}, {"col", e.col}, {"estimate", json_number(e.estimate)},
                           {"reference", json_number(e.reference)}, {"se", json_number(e.standard_error)},
                           {"z", json_number(e.z)}});
    }
    return {{"pass", v.pass},           {"max_abs_z", json_number(v.max_abs_z)}, {"mean_z", json_number(v.mean_z)},
            {"sign_bias", v.sign_bias}, {"skipped_divergent", v.skipped_divergent}, {"entries", entries}};
}

}  // namespace ndpa
