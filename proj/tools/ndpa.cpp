// ndpa: command-line front end.
//
// Exit codes: 0 success, 1 validation failure, 2 bad input or a request the
// model cannot serve (for example a spectrum above threshold with detuning).

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ndpa/ndpa.hpp"

namespace {

struct Common {
    std::string config;
    std::string presets;
    std::string out;
    std::string format = "csv";
    std::optional<std::uint64_t> seed;
    int jobs = 1;
};

ndpa::SystemConfig load_system(const Common& c) {
    if (!c.config.empty()) return ndpa::load_config(c.config);
    return ndpa::load_presets(c.presets).system();
}

void write_one(std::ostream& os, const ndpa::Table& t, const std::string& format) {
    if (format == "json") {
        os << ndpa::to_json(t).dump(2) << "\n";
    } else {
        ndpa::write_csv(os, t);
    }
}

/// Tables go to <out>/<name>.<ext> when --out is set, else to stdout
/// (CSV tables separated by a blank line, JSON as one array).
void emit(const Common& c, const std::vector<ndpa::Table>& tables) {
    if (c.out.empty()) {
        if (c.format == "json" && tables.size() > 1) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& t : tables) arr.push_back(ndpa::to_json(t));
            std::cout << arr.dump(2) << "\n";
            return;
        }
        for (std::size_t k = 0; k < tables.size(); ++k) {
            if (k) std::cout << "\n";
            write_one(std::cout, tables[k], c.format);
        }
        return;
    }
    std::filesystem::create_directories(c.out);
    for (const auto& t : tables) {
        const auto path = std::filesystem::path(c.out) / (t.name + "." + c.format);
        std::ofstream f(path);
        if (!f) throw ndpa::Error(ndpa::ErrorKind::InvalidParameter, "cannot write '" + path.string() + "'");
        write_one(f, t, c.format);
        std::cerr << "wrote " << path.string() << "\n";
    }
}

void emit_json(const Common& c, const std::string& name, const nlohmann::json& j) {
    if (c.out.empty()) {
        std::cout << j.dump(2) << "\n";
        return;
    }
    std::filesystem::create_directories(c.out);
    const auto path = std::filesystem::path(c.out) / (name + ".json");
    std::ofstream f(path);
    if (!f) throw ndpa::Error(ndpa::ErrorKind::InvalidParameter, "cannot write '" + path.string() + "'");
    f << j.dump(2) << "\n";
    std::cerr << "wrote " << path.string() << "\n";
}

ndpa::Table steady_state_table(const ndpa::SystemConfig& sys, const std::vector<double>& grid, double phi_s) {
    ndpa::Table t;
    t.name = "steady-state";
    t.add_meta("critical_pump_amplitude_m", ndpa::critical_pump_amplitude(sys));
    t.columns = {"mu", "a_s", "a_i", "a_j", "regime"};
    for (double mu : grid) {
        const auto st = ndpa::solve_steady_state(sys, {mu, phi_s, 0.0});
        t.rows.push_back({mu, std::abs(st.a_s), std::abs(st.a_i), std::abs(st.a_j), std::string(ndpa::to_string(st.regime))});
    }
    return t;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Phononic nondegenerate parametric amplifier: steady states, noise spectra, squeezing"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "ndpa 1.0.0");

    Common c;
    app.add_option("--config", c.config, "system config JSON (default: presets system)")->envname("NDPA_CONFIG");
    app.add_option("--presets", c.presets, "presets file (default: $NDPA_PRESETS or the installed data dir)");
    app.add_option("--out", c.out, "output directory (default: stdout)")->envname("NDPA_OUT");
    app.add_option("--format", c.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->envname("NDPA_FORMAT");
    app.add_option("--seed", c.seed, "RNG seed for stochastic runs")->envname("NDPA_SEED");
    app.add_option("--jobs", c.jobs, "worker threads for stochastic runs")->check(CLI::PositiveNumber)->envname("NDPA_JOBS");

    // steady-state
    auto* ss = app.add_subcommand("steady-state", "fixed-point amplitudes versus drive");
    std::vector<double> mu_sweep{0.0, 3.0, 301};
    double ss_phi = 0.0;
    ss->add_option("--mu-sweep", mu_sweep, "START STOP POINTS")->expected(3)->capture_default_str();
    ss->add_option("--phi-s", ss_phi, "pump force phase (rad)");

    // figure
    auto* fig = app.add_subcommand("figure", "tabulated data for a standard plot");
    std::string fig_name;
    fig->add_option("name", fig_name, "figure name")->required()->check(CLI::IsMember(ndpa::figure_names()));

    // sweep
    auto* sw = app.add_subcommand("sweep", "one-dimensional sweep of collective variances");
    ndpa::SweepSpec spec;
    std::string axis = "mu", spacing = "linear";
    sw->add_option("--axis", axis, "mu | delta_gamma | delta_omega | delta | tau_m")->capture_default_str();
    sw->add_option("--start", spec.start)->capture_default_str();
    sw->add_option("--stop", spec.stop)->capture_default_str();
    sw->add_option("--points", spec.points)->capture_default_str();
    sw->add_option("--spacing", spacing)->check(CLI::IsMember({"linear", "log"}))->capture_default_str();
    sw->add_option("--mu", spec.mu, "fixed drive");
    sw->add_option("--delta-gamma", spec.delta_gamma, "fixed loss asymmetry");
    sw->add_option("--delta-omega", spec.delta_omega, "fixed frequency mismatch");
    sw->add_option("--delta", spec.delta, "fixed pump detuning in units of the mean linewidth");
    sw->add_option("--tau-m", spec.tau_m, "measurement time in s (0 = steady state)");

    // validate
    auto* val = app.add_subcommand("validate", "closed forms vs engine vs stochastic oracle");
    std::string level = "fast";
    int n_traj = 10000;
    val->add_option("--level", level)->check(CLI::IsMember({"fast", "full"}))->capture_default_str();
    val->add_option("--n-traj", n_traj, "Monte Carlo ensemble size")->check(CLI::Range(2, 100000000))->capture_default_str();

    // variance
    auto* var = app.add_subcommand("variance", "collective covariance matrix at one operating point");
    double v_mu = 0.5, v_delta = 0.0, v_tau = 0.0;
    std::string v_method = "integral";
    var->add_option("--mu", v_mu)->capture_default_str();
    var->add_option("--delta", v_delta, "pump detuning in units of the mean linewidth");
    var->add_option("--tau-m", v_tau, "measurement time in s (0 = steady state)");
    var->add_option("--method", v_method)->check(CLI::IsMember({"integral", "lyapunov"}))->capture_default_str();

    // spectrum
    auto* spc = app.add_subcommand("spectrum", "collective noise spectral densities");
    double s_mu = 0.5, s_delta = 0.0, s_max = 5.0;
    int s_points = 201;
    spc->add_option("--mu", s_mu)->capture_default_str();
    spc->add_option("--delta", s_delta, "pump detuning in units of the mean linewidth");
    spc->add_option("--omega-max", s_max, "upper frequency in units of the mean linewidth")->capture_default_str();
    spc->add_option("--points", s_points)->check(CLI::Range(2, 1000000))->capture_default_str();

    // simulate
    auto* sim = app.add_subcommand("simulate", "stochastic ensemble and comparison with the engine");
    double m_mu = 0.5;
    int m_traj = 1000;
    bool m_welch = false;
    std::string m_dump;
    sim->add_option("--mu", m_mu)->capture_default_str();
    sim->add_option("--n-traj", m_traj)->check(CLI::Range(2, 100000000))->capture_default_str();
    sim->add_flag("--welch", m_welch, "also estimate spectra");
    sim->add_option("--dump", m_dump, "write raw trajectories to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const ndpa::SystemConfig sys = load_system(c);

        if (*ss) {
            if (mu_sweep[2] < 2 || mu_sweep[2] != std::floor(mu_sweep[2])) {
                throw ndpa::Error(ndpa::ErrorKind::InvalidRange, "--mu-sweep POINTS must be an integer >= 2");
            }
            emit(c, {steady_state_table(sys, ndpa::linspace(mu_sweep[0], mu_sweep[1], static_cast<int>(mu_sweep[2])), ss_phi)});
        } else if (*fig) {
            const auto presets = ndpa::load_presets(c.presets);
            emit(c, ndpa::make_figure(fig_name, sys, presets.figures()));
        } else if (*sw) {
            spec.axis = ndpa::parse_axis(axis);
            spec.spacing = spacing == "log" ? ndpa::Spacing::Log : ndpa::Spacing::Linear;
            emit(c, {ndpa::run_sweep(sys, spec)});
        } else if (*val) {
            ndpa::ValidationOptions opt;
            opt.level = level == "full" ? ndpa::Level::Full : ndpa::Level::Fast;
            if (c.seed) opt.seed = *c.seed;
            opt.jobs = c.jobs;
            opt.n_traj = n_traj;
            const auto rep = ndpa::run_validation(opt, [](const ndpa::CriterionResult& r) {
                std::cerr << "criterion " << r.id << " (" << r.title << "): "
                          << (r.skipped ? "SKIP" : (r.pass ? "PASS" : "FAIL")) << "  [" << r.seconds << " s]\n";
                for (const auto& m : r.metrics) {
                    std::cerr << "    " << m.name << " = " << ndpa::format_number(m.value);
                    if (!m.relation.empty()) std::cerr << "  (" << m.relation << " " << ndpa::format_number(m.bound) << ")";
                    std::cerr << "\n";
                }
                for (const auto& n : r.notes) std::cerr << "    note: " << n << "\n";
            });
            if (c.format == "json") {
                emit_json(c, "validation", ndpa::to_json(rep));
            } else {
                emit(c, {ndpa::validation_table(rep)});
            }
            return rep.pass() ? 0 : 1;
        } else if (*var) {
            const double gamma = 0.5 * (sys.mode_i.gamma + sys.mode_j.gamma);
            const ndpa::DriveConfig d{v_mu, 0.0, v_delta * gamma};
            const auto fm = ndpa::build_model(sys, d, true);
            ndpa::CovarianceReport rep;
            if (v_method == "lyapunov") {
                if (v_tau > 0.0) throw ndpa::Error(ndpa::ErrorKind::InvalidParameter, "--tau-m needs --method integral");
                rep = ndpa::variance_lyapunov(fm);
            } else {
                rep = ndpa::variance_integral(fm, v_tau > 0.0 ? ndpa::Band::measurement_time(v_tau) : ndpa::Band::full());
            }
            if (c.format == "json") {
                emit_json(c, "covariance", ndpa::to_json(rep));
            } else {
                emit(c, {ndpa::covariance_table(rep)});
            }
        } else if (*spc) {
            const double gamma = 0.5 * (sys.mode_i.gamma + sys.mode_j.gamma);
            const auto fm = ndpa::build_model(sys, {s_mu, 0.0, s_delta * gamma}, true);
            auto grid = ndpa::linspace(0.0, s_max * gamma, s_points);
            if (!ndpa::is_strictly_stable(fm)) grid.front() = grid[1] * 1e-3;
            auto t = ndpa::spectrum_table(ndpa::spectrum_series(fm, grid));
            t.add_meta("mu", s_mu);
            t.add_meta("delta_over_gamma", s_delta);
            emit(c, {t});
        } else if (*sim) {
            if (!c.seed) throw ndpa::Error(ndpa::ErrorKind::SeedRequired, "simulate needs --seed");
            const ndpa::DriveConfig d{m_mu, 0.0, 0.0};
            auto plan = ndpa::recommended_plan(sys, d, m_traj, *c.seed);
            plan.jobs = c.jobs;
            plan.dump_path = m_dump;
            if (m_welch) plan.estimator = ndpa::Estimator::WelchSpectrum;
            const auto stats = ndpa::simulate(sys, d, plan);
            const auto verdict = ndpa::compare(stats, ndpa::variance_integral(ndpa::membrane_model(sys, d)));
            emit_json(c, "simulation", {{"stats", ndpa::to_json(stats)}, {"comparison", ndpa::to_json(verdict)},
                                        {"plan", {{"dt", plan.dt}, {"t_total", plan.t_total}, {"burn_in", plan.burn_in},
                                                  {"sample_stride", plan.sample_stride}}}});
        }
    } catch (const ndpa::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
