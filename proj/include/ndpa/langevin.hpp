#pragma once

// Stochastic oracle: Euler-Maruyama integration of the nonlinear slow-flow
// equations with additive thermal noise, for trajectory ensembles.
//
// Amplitudes are integrated as u_k = A_k / x_k, x_k the thermal amplitude
// of mode k, which rescales the equations exactly and gives every membrane
// quadrature unit equilibrium variance. With a detuned drive the membranes
// are integrated in the frame rotating at delta/2.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <exception>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "ndpa/core_model.hpp"
#include "ndpa/error.hpp"
#include "ndpa/fluctuation.hpp"
#include "ndpa/philox.hpp"
#include "ndpa/steady_state.hpp"
#include "ndpa/welch.hpp"

namespace ndpa {

enum class PumpHandling {
    Auto,        ///< explicit below threshold, eliminated above
    Explicit,    ///< pump integrated as a state variable
    Eliminated,  ///< pump slaved to the membranes, its noise fed through
};

enum class Dynamics {
    Nonlinear,   ///< full slow-flow right-hand side
    Linearized,  ///< pump product frozen at its mean (below threshold only)
};

enum class Estimator { VarianceOnly, WelchSpectrum };

struct SimPlan {
    double dt = 0.0;       ///< s; 0 selects default_dt()
    double t_total = 0.0;  ///< s, including burn-in
    int n_traj = 0;
    std::optional<std::uint64_t> seed;
    double burn_in = 0.5;  ///< discarded fraction of t_total
    Estimator estimator = Estimator::VarianceOnly;
    WelchOptions welch{};
    PumpHandling pump = PumpHandling::Auto;
    Dynamics dynamics = Dynamics::Nonlinear;
    int sample_stride = 10;  ///< steps between recorded samples
    int jobs = 1;            ///< worker threads; 0 = hardware concurrency
    int bootstrap = 200;     ///< resamples for standard errors
    bool reproducible = true;
    bool check_burn_in = true;
    std::string dump_path;   ///< raw trajectory dump (empty = none)
};

struct EnsembleStats {
    std::vector<std::string> labels;
    std::array<double, 3> mean_amplitude{};  ///< <|A_i|>, <|A_j|>, <|A_S|> (m)
    std::array<double, 3> mean_amplitude_se{};
    Eigen::MatrixXd covariance;
    Eigen::MatrixXd standard_error;
    int n_traj = 0;
    long samples_per_traj = 0;
    std::uint64_t seed = 0;
    std::optional<WelchEstimate> spectrum;
    std::vector<Eigen::VectorXd> spectrum_se;  ///< per frequency, diagonal entries
};

namespace detail {

/// Coefficients of the rescaled slow flow.
struct SlowFlow {
    double gamma[3];
    double x_th[3];
    double coupling[3];  ///< (g/2) chi_k x_l x_m / x_k
    std::complex<double> drive;
    double delta = 0.0;
    double mu = 0.0;
    double phi_s = 0.0;
    bool eliminated = false;
    bool linearized = false;
    bool above = false;
    std::complex<double> mean[3];  ///< steady state, rescaled
    double bound = 0.0;
};

inline bool resolve_elimination(PumpHandling p, double mu) {
    if (p == PumpHandling::Auto) return mu > 1.0;
    return p == PumpHandling::Eliminated;
}

inline SlowFlow make_flow(const SystemConfig& sys, const DriveConfig& drive, const SimPlan& plan) {
    constexpr std::complex<double> I{0.0, 1.0};
    if (!(sys.temperature > 0.0)) throw Error(ErrorKind::InvalidParameter, "simulation requires temperature > 0");
    const ModeParams modes[3] = {sys.mode_i, sys.mode_j, sys.mode_s};
    SlowFlow f;
    for (int k = 0; k < 3; ++k) {
        f.gamma[k] = modes[k].gamma;
        f.x_th[k] = std::sqrt(thermal_variance(modes[k], sys.temperature, sys.k_b));
    }
    const double ci = 0.5 * sys.g * susceptibility(sys.mode_i);
    const double cj = 0.5 * sys.g * susceptibility(sys.mode_j);
    const double cs = 0.5 * sys.g * susceptibility(sys.mode_s);
    f.coupling[0] = ci * f.x_th[1] * f.x_th[2] / f.x_th[0];
    f.coupling[1] = cj * f.x_th[0] * f.x_th[2] / f.x_th[1];
    f.coupling[2] = cs * f.x_th[0] * f.x_th[1] / f.x_th[2];
    f.drive = I * (drive.mu * critical_pump_amplitude(sys)) * std::polar(1.0, drive.phi_s) / f.x_th[2];
    f.delta = drive.delta;
    f.mu = drive.mu;
    f.phi_s = drive.phi_s;
    f.eliminated = resolve_elimination(plan.pump, drive.mu);
    f.linearized = plan.dynamics == Dynamics::Linearized;
    f.above = drive.mu > 1.0;
    if (f.above && drive.delta != 0.0) {
        throw Error(ErrorKind::DetunedAboveThreshold, "the above-threshold state with detuning is not modeled");
    }
    if (f.linearized && drive.mu >= 1.0) {
        throw Error(ErrorKind::InvalidParameter, "linearized dynamics are only provided below threshold");
    }
    DriveConfig resonant = drive;
    resonant.delta = 0.0;
    const SteadyState st = solve_steady_state(sys, resonant);
    f.mean[0] = st.a_i / f.x_th[0];
    f.mean[1] = st.a_j / f.x_th[1];
    f.mean[2] = st.a_s / f.x_th[2];
    f.bound = 1e3 * (1.0 + 1.0 / std::max(1e-3, std::abs(1.0 - drive.mu)));
    return f;
}

/// One Euler-Maruyama step. `z` supplies six standard normals. Written in
/// real arithmetic; this is the hot loop of every ensemble.
inline void em_step(const SlowFlow& f, std::complex<double> u[3], const std::array<double, 6>& z, double dt) {
    const double si = std::sqrt(f.gamma[0] * dt);
    const double sj = std::sqrt(f.gamma[1] * dt);
    const double ss = std::sqrt(f.gamma[2] * dt);
    const double ir = u[0].real(), ii = u[0].imag();
    const double jr = u[1].real(), ji = u[1].imag();

    // Integrated pump over the step, u_S dt.
    double pr, pi;
    if (f.linearized) {
        pr = f.mean[2].real() * dt;
        pi = f.mean[2].imag() * dt;
    } else if (f.eliminated) {
        // drive + i c_S u_i u_j, plus the pump noise integrated over the step.
        const double qr = ir * jr - ii * ji;
        const double qi = ir * ji + ii * jr;
        const double feed = 2.0 / f.gamma[2] * ss;
        pr = (f.drive.real() - f.coupling[2] * qi) * dt + feed * z[4];
        pi = (f.drive.imag() + f.coupling[2] * qr) * dt + feed * z[5];
    } else {
        pr = u[2].real() * dt;
        pi = u[2].imag() * dt;
    }
    // i c conj(u_other) (u_S dt)
    auto coupled = [&](double c, double or_, double oi, double& re, double& im) {
        const double mr = or_ * pr + oi * pi;
        const double mi = or_ * pi - oi * pr;
        re = -c * mi;
        im = c * mr;
    };
    double ci_r, ci_i, cj_r, cj_i;
    coupled(f.coupling[0], jr, ji, ci_r, ci_i);
    coupled(f.coupling[1], ir, ii, cj_r, cj_i);
    const double hd = 0.5 * f.delta * dt;
    const double hi = 0.5 * f.gamma[0];
    const double hj = 0.5 * f.gamma[1];
    u[0] = {ir + hi * (-ir * dt + ci_r) - hd * ii + si * z[0], ii + hi * (-ii * dt + ci_i) + hd * ir + si * z[1]};
    u[1] = {jr + hj * (-jr * dt + cj_r) - hd * ji + sj * z[2], ji + hj * (-ji * dt + cj_i) + hd * jr + sj * z[3]};
    if (!f.eliminated) {
        const double sr = u[2].real(), sim = u[2].imag();
        double nr = 0.0, ni = 0.0;
        if (!f.linearized) {
            nr = -f.coupling[2] * (ir * ji + ii * jr);
            ni = f.coupling[2] * (ir * jr - ii * ji);
        }
        const double hs = 0.5 * f.gamma[2] * dt;
        const double d = f.delta * dt;
        u[2] = {sr + hs * (-sr + nr + f.drive.real()) - d * sim + ss * z[4],
                sim + hs * (-sim + ni + f.drive.imag()) + d * sr + ss * z[5]};
    }
}

/// True if any amplitude strayed implausibly far from the steady state.
inline bool out_of_bounds(const SlowFlow& f, const std::complex<double> u[3]) {
    for (int k = 0; k < 3; ++k) {
        const double dev = std::abs(u[k] - f.mean[k]);
        if (!std::isfinite(dev) || dev > f.bound + 2.0 * std::abs(f.mean[k])) return true;
    }
    return false;
}

/// Tracks unwrapped membrane phases relative to the steady-state phase.
struct PhaseTracker {
    double phase[2] = {0.0, 0.0};

    void update(const SlowFlow& f, const std::complex<double> u[3]) {
        const std::complex<double> ref = std::complex<double>(0.0, 1.0) * std::polar(1.0, 0.5 * f.phi_s);
        for (int k = 0; k < 2; ++k) {
            const double wrapped = std::arg(u[k] * std::conj(ref));
            double d = wrapped - std::remainder(phase[k], 2.0 * std::numbers::pi);
            d = std::remainder(d, 2.0 * std::numbers::pi);
            phase[k] += d;
        }
    }
};

/// Raw quadratures in the engine ordering: (alpha_i, alpha_j, [alpha_S],
/// beta_i, beta_j, [beta_S]), all relative to the steady state.
inline Eigen::VectorXd raw_quadratures(const SlowFlow& f, const std::complex<double> u[3], const PhaseTracker& ph) {
    const int n = f.eliminated ? 4 : 6;
    const int h = n / 2;
    Eigen::VectorXd q(n);
    const std::complex<double> half = std::polar(1.0, -0.5 * f.phi_s);
    if (f.above) {
        for (int k = 0; k < 2; ++k) {
            const double a = std::abs(f.mean[k]);
            q(k) = -a * ph.phase[k];
            q(h + k) = std::abs(u[k]) - a;
        }
    } else {
        for (int k = 0; k < 2; ++k) {
            const std::complex<double> v = u[k] * half;
            q(k) = v.real();
            q(h + k) = v.imag();
        }
    }
    if (!f.eliminated) {
        const std::complex<double> v = (u[2] - f.mean[2]) * std::polar(1.0, -f.phi_s);
        q(2) = v.real();
        q(5) = v.imag();
    }
    return q;
}

inline std::array<double, 6> normals6(const NormalStream& rng, std::uint64_t step, std::uint32_t traj,
                                      std::uint32_t group_base) {
    const auto a = rng.draw(step, traj, group_base);
    const auto b = rng.draw2(step, traj, group_base + 1);
    return {a[0], a[1], a[2], a[3], b[0], b[1]};
}

inline void initial_state(const SlowFlow& f, const NormalStream& rng, std::uint32_t traj, std::complex<double> u[3]) {
    // Steady state plus one thermal draw per quadrature.
    const auto z = normals6(rng, std::numeric_limits<std::uint64_t>::max(), traj, 8);
    for (int k = 0; k < 3; ++k) u[k] = f.mean[k] + std::complex<double>(z[2 * k], z[2 * k + 1]);
    if (f.eliminated) u[2] = f.mean[2];
}

struct TrajectoryResult {
    Eigen::MatrixXd second_moment;
    std::array<double, 3> amplitude{};
    long samples = 0;
    Eigen::MatrixXd series;  ///< collective samples (dump / Welch)
    std::optional<WelchEstimate> spectrum;
    std::vector<double> phase_minus_sq;  ///< phase-diffusion runs
    std::vector<double> phase_plus_sq;
};

inline std::uint64_t resolve_seed(const SimPlan& plan) {
    if (plan.seed) return *plan.seed;
    if (plan.reproducible) throw Error(ErrorKind::SeedRequired, "reproducible mode requires an explicit seed");
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

/// Runs `work(traj)` for every trajectory on `jobs` threads; results are
/// stored by index so reductions can proceed in a fixed order.
template <class Work>
void run_pool(int n_traj, int jobs, Work&& work) {
    if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    jobs = std::min(jobs, n_traj);
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(n_traj);
    auto loop = [&]() {
        for (int t = next++; t < n_traj; t = next++) {
            try {
                work(t);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        }
    };
    if (jobs <= 1) {
        loop();
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < jobs; ++k) pool.emplace_back(loop);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Default step, (2 / gamma_max) / 200 over the integrated modes.
[[nodiscard]] inline double default_dt(const SystemConfig& sys, const DriveConfig& drive, PumpHandling pump) {
    double gmax = std::max(sys.mode_i.gamma, sys.mode_j.gamma);
    if (!detail::resolve_elimination(pump, drive.mu)) gmax = std::max(gmax, sys.mode_s.gamma);
    gmax = std::max(gmax, std::abs(drive.delta));
    return 2.0 / gmax / 200.0;
}

/// Linearized membrane dynamics with the pump eliminated, in any regime.
[[nodiscard]] inline FluctuationModel membrane_model(const SystemConfig& sys, const DriveConfig& drive) {
    if (drive.delta != 0.0) return build_detuned(sys, drive);
    FluctuationModel fm = drive.mu > 1.0 ? build_above(sys, drive, false) : build_below(sys, drive);
    detail::eliminate(fm, {2, 5});
    fm.rotation = detail::sum_difference_rotation(2, false);
    fm.labels = {"x+", "x-", "y+", "y-"};
    fm.rate_scale = std::max(sys.mode_i.gamma, sys.mode_j.gamma);
    return fm;
}

/// Slowest non-marginal decay rate of the linearized dynamics, used to size
/// burn-in. Marginal (free-phase) modes are skipped.
[[nodiscard]] inline double slowest_decay_rate(const SystemConfig& sys, const DriveConfig& drive) {
    const FluctuationModel fm = membrane_model(sys, drive);
    const Eigen::VectorXcd ev = drift_eigenvalues(fm);
    double slow = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
        const double r = -ev(k).real();
        if (r > 1e-9 * fm.rate_scale) slow = std::min(slow, r);
    }
    return slow;
}

/// Fastest decay rate of the linearized membrane dynamics (pump eliminated).
[[nodiscard]] inline double fastest_decay_rate(const SystemConfig& sys, const DriveConfig& drive) {
    return drift_eigenvalues(membrane_model(sys, drive)).cwiseAbs().maxCoeff();
}

/// A plan with burn-in of `burn_decays` slowest decay times, measurement of
/// `measure_decays` more, and dt = (2 / fastest rate) / dt_divisor.
[[nodiscard]] inline SimPlan recommended_plan(const SystemConfig& sys, const DriveConfig& drive, int n_traj,
                                              std::uint64_t seed, double dt_divisor = 1000.0,
                                              double burn_decays = 5.0, double measure_decays = 5.0) {
    SimPlan p;
    p.n_traj = n_traj;
    p.seed = seed;
    p.pump = PumpHandling::Eliminated;
    const double slow = slowest_decay_rate(sys, drive);
    const double fast = fastest_decay_rate(sys, drive);
    p.dt = 2.0 / fast / dt_divisor;
    const double burn = burn_decays / slow;
    p.t_total = burn + measure_decays / slow;
    p.burn_in = burn / p.t_total;
    p.sample_stride = std::max(1, static_cast<int>(0.05 / (fast * p.dt)));
    return p;
}

inline void validate(const SimPlan& plan, const SystemConfig& sys, const DriveConfig& drive) {
    if (!(plan.dt > 0.0) || !(plan.t_total > plan.dt)) {
        throw Error(ErrorKind::InvalidParameter, "plan needs dt > 0 and t_total > dt");
    }
    if (plan.n_traj < 2) throw Error(ErrorKind::InvalidParameter, "plan needs n_traj >= 2");
    if (!(plan.burn_in >= 0.0 && plan.burn_in < 1.0)) {
        throw Error(ErrorKind::InvalidParameter, "burn_in must lie in [0, 1)");
    }
    if (plan.sample_stride < 1 || plan.bootstrap < 2) {
        throw Error(ErrorKind::InvalidParameter, "sample_stride >= 1 and bootstrap >= 2 required");
    }
    double step_cap = 2.0 / std::max(sys.mode_i.gamma, sys.mode_j.gamma) / 100.0;
    if (!detail::resolve_elimination(plan.pump, drive.mu)) step_cap = std::min(step_cap, 2.0 / sys.mode_s.gamma / 100.0);
    if (plan.dt > step_cap * (1.0 + 1e-12)) {
        throw Error(ErrorKind::InvalidParameter, "dt exceeds (2 / gamma_max) / 100 for the integrated modes");
    }
    if (plan.check_burn_in && drive.mu != 1.0) {
        const double slow = slowest_decay_rate(sys, drive);
        if (plan.burn_in * plan.t_total < 5.0 / slow * (1.0 - 1e-9)) {
            throw Error(ErrorKind::InvalidParameter, "burn-in shorter than 5 decay times of the slowest quadrature");
        }
    }
}

namespace detail {

inline void write_u64(std::ofstream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f64(std::ofstream& out, double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(v));
    write_u64(out, bits);
}

/// Flat little-endian dump: "NDPATRJ1", n_traj, n_samples, n_channels, seed
/// (u64 each), then samples in trajectory-major, sample, channel order.
inline void dump_trajectories(const std::string& path, const std::vector<TrajectoryResult>& res, std::uint64_t seed) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::InvalidParameter, "cannot open dump file '" + path + "'");
    out.write("NDPATRJ1", 8);
    const auto n_samples = static_cast<std::uint64_t>(res.front().series.cols());
    const auto n_channels = static_cast<std::uint64_t>(res.front().series.rows());
    write_u64(out, res.size());
    write_u64(out, n_samples);
    write_u64(out, n_channels);
    write_u64(out, seed);
    for (const auto& r : res)
        for (Eigen::Index s = 0; s < r.series.cols(); ++s)
            for (Eigen::Index c = 0; c < r.series.rows(); ++c) write_f64(out, r.series(c, s));
}

}  // namespace detail

/// Integrates the ensemble and estimates the collective-quadrature
/// covariance (about the deterministic steady state) with bootstrap errors.
[[nodiscard]] inline EnsembleStats simulate(const SystemConfig& sys, const DriveConfig& drive, SimPlan plan) {
    validate(sys);
    validate(drive);
    if (drive.delta != 0.0) check_detuning(sys, drive);
    if (plan.dt == 0.0) plan.dt = default_dt(sys, drive, plan.pump);
    validate(plan, sys, drive);
    const std::uint64_t seed = detail::resolve_seed(plan);
    const detail::SlowFlow flow = detail::make_flow(sys, drive, plan);
    const NormalStream rng(seed);

    const int n = flow.eliminated ? 4 : 6;
    const Eigen::MatrixXd rot = detail::sum_difference_rotation(2, !flow.eliminated);
    const auto steps = static_cast<std::uint64_t>(std::llround(plan.t_total / plan.dt));
    const auto burn = static_cast<std::uint64_t>(std::llround(plan.burn_in * static_cast<double>(steps)));
    const bool keep_series = plan.estimator == Estimator::WelchSpectrum || !plan.dump_path.empty();
    const double sample_dt = plan.dt * plan.sample_stride;

    std::vector<detail::TrajectoryResult> results(plan.n_traj);
    detail::run_pool(plan.n_traj, plan.jobs, [&](int t) {
        const auto traj = static_cast<std::uint32_t>(t);
        std::complex<double> u[3];
        detail::initial_state(flow, rng, traj, u);
        detail::PhaseTracker ph;
        ph.update(flow, u);
        detail::TrajectoryResult& r = results[t];
        r.second_moment = Eigen::MatrixXd::Zero(n, n);
        std::vector<double> series;
        for (std::uint64_t s = 0; s < steps; ++s) {
            detail::em_step(flow, u, detail::normals6(rng, s, traj, 0), plan.dt);
            if ((s + 1) % plan.sample_stride != 0) continue;
            if (detail::out_of_bounds(flow, u)) {
                throw Error(ErrorKind::UnstableStep, "trajectory left the stability bound; reduce dt");
            }
            ph.update(flow, u);
            if (s + 1 <= burn) continue;
            const Eigen::VectorXd q = rot * detail::raw_quadratures(flow, u, ph);
            r.second_moment.noalias() += q * q.transpose();
            r.amplitude[0] += std::abs(u[0]);
            r.amplitude[1] += std::abs(u[1]);
            r.amplitude[2] +=
                flow.eliminated ? std::abs(flow.drive + std::complex<double>(0.0, flow.coupling[2]) * u[0] * u[1])
                                : std::abs(u[2]);
            ++r.samples;
            if (keep_series) series.insert(series.end(), q.data(), q.data() + n);
        }
        if (r.samples == 0) throw Error(ErrorKind::InsufficientDuration, "no samples after burn-in");
        r.second_moment /= static_cast<double>(r.samples);
        for (auto& a : r.amplitude) a /= static_cast<double>(r.samples);
        if (keep_series) {
            r.series = Eigen::Map<Eigen::MatrixXd>(series.data(), n, r.samples);
            if (plan.estimator == Estimator::WelchSpectrum) r.spectrum = welch(r.series, sample_dt, plan.welch);
            if (plan.dump_path.empty()) r.series.resize(0, 0);
        }
    });

    EnsembleStats st;
    st.labels = flow.eliminated ? std::vector<std::string>{"x+", "x-", "y+", "y-"}
                                : std::vector<std::string>{"x+", "x-", "xS", "y+", "y-", "yS"};
    st.n_traj = plan.n_traj;
    st.samples_per_traj = results.front().samples;
    st.seed = seed;

    auto mean_of = [&](const std::vector<int>& idx) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        std::array<double, 3> a{};
        for (int t : idx) {
            m += results[t].second_moment;
            for (int k = 0; k < 3; ++k) a[k] += results[t].amplitude[k];
        }
        m /= static_cast<double>(idx.size());
        for (auto& v : a) v /= static_cast<double>(idx.size());
        return std::pair{m, a};
    };
    std::vector<int> all(plan.n_traj);
    for (int t = 0; t < plan.n_traj; ++t) all[t] = t;
    auto [cov, amp] = mean_of(all);
    st.covariance = 0.5 * (cov + cov.transpose());

    // Trajectory-level bootstrap.
    std::mt19937_64 boot(seed ^ 0x5bd1e9955bd1e995ull);
    std::uniform_int_distribution<int> pick(0, plan.n_traj - 1);
    Eigen::MatrixXd s1 = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(n, n);
    std::array<double, 3> a1{}, a2{};
    std::vector<int> idx(plan.n_traj);
    for (int b = 0; b < plan.bootstrap; ++b) {
        for (auto& i : idx) i = pick(boot);
        auto [m, a] = mean_of(idx);
        s1 += m;
        s2 += m.cwiseProduct(m);
        for (int k = 0; k < 3; ++k) {
            a1[k] += a[k];
            a2[k] += a[k] * a[k];
        }
    }
    const double nb = plan.bootstrap;
    st.standard_error = ((s2 - s1.cwiseProduct(s1) / nb) / (nb - 1.0)).cwiseMax(0.0).cwiseSqrt();
    st.standard_error = 0.5 * (st.standard_error + st.standard_error.transpose()).eval();
    for (int k = 0; k < 3; ++k) {
        const double x = flow.x_th[k];
        st.mean_amplitude[k] = amp[k] * x;
        st.mean_amplitude_se[k] = std::sqrt(std::max(0.0, (a2[k] - a1[k] * a1[k] / nb) / (nb - 1.0))) * x;
    }

    if (plan.estimator == Estimator::WelchSpectrum) {
        WelchEstimate sum = *results.front().spectrum;
        const std::size_t bins = sum.values.size();
        std::vector<Eigen::VectorXd> sq(bins, Eigen::VectorXd::Zero(n));
        for (std::size_t k = 0; k < bins; ++k) {
            const Eigen::VectorXd d = sum.values[k].diagonal().real();
            sq[k] = d.cwiseProduct(d);
        }
        for (int t = 1; t < plan.n_traj; ++t) {
            for (std::size_t k = 0; k < bins; ++k) {
                sum.values[k] += results[t].spectrum->values[k];
                const Eigen::VectorXd d = results[t].spectrum->values[k].diagonal().real();
                sq[k] += d.cwiseProduct(d);
            }
        }
        const double nt = plan.n_traj;
        st.spectrum_se.resize(bins);
        for (std::size_t k = 0; k < bins; ++k) {
            sum.values[k] /= nt;
            const Eigen::VectorXd mean = sum.values[k].diagonal().real();
            const Eigen::VectorXd var = (sq[k] / nt - mean.cwiseProduct(mean)) * (nt / (nt - 1.0));
            st.spectrum_se[k] = (var.cwiseMax(0.0) / nt).cwiseSqrt();
        }
        sum.segments *= plan.n_traj;
        st.spectrum = std::move(sum);
    }
    if (!plan.dump_path.empty()) detail::dump_trajectories(plan.dump_path, results, seed);
    return st;
}

// ---------------------------------------------------------------------------
// Phase diffusion
// ---------------------------------------------------------------------------

struct PhaseDiffusionResult {
    std::vector<double> times;          ///< s, measured from the start
    std::vector<double> msd_minus;      ///< <(dphi_-(t) - dphi_-(0))^2>, dphi_- = (phi_i - phi_j)/sqrt2
    std::vector<double> msd_plus;       ///< same for the phase sum
    double slope = 0.0;                 ///< rad^2/s, fit over [fit_start, end]
    double slope_se = 0.0;
    double intercept = 0.0;
    double fit_start = 0.0;
    double plus_early = 0.0;            ///< mean msd_plus over the first half of the fit window
    double plus_late = 0.0;             ///< mean msd_plus over the second half
    double plus_late_se = 0.0;
};

namespace detail {

inline std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                                            std::size_t from) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const auto m = static_cast<double>(x.size() - from);
    for (std::size_t k = from; k < x.size(); ++k) {
        sx += x[k];
        sy += y[k];
        sxx += x[k] * x[k];
        sxy += x[k] * y[k];
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return {slope, (sy - slope * sx) / m};
}

}  // namespace detail

/// Measures diffusion of the membrane phase difference above threshold.
/// The fit uses samples after plan.burn_in of the run; the window must span
/// at least 10 / gamma.
[[nodiscard]] inline PhaseDiffusionResult phase_diffusion_measure(const SystemConfig& sys, const DriveConfig& drive,
                                                                  SimPlan plan) {
    validate(sys);
    validate(drive);
    if (!(drive.mu > 1.0)) throw Error(ErrorKind::BelowThreshold, "phase diffusion requires mu > 1");
    if (plan.dt == 0.0) plan.dt = default_dt(sys, drive, plan.pump);
    plan.check_burn_in = false;
    validate(plan, sys, drive);
    const double window = (1.0 - plan.burn_in) * plan.t_total;
    if (window < 10.0 / std::min(sys.mode_i.gamma, sys.mode_j.gamma)) {
        throw Error(ErrorKind::InsufficientDuration, "fit window shorter than 10 / gamma");
    }
    const std::uint64_t seed = detail::resolve_seed(plan);
    const detail::SlowFlow flow = detail::make_flow(sys, drive, plan);
    const NormalStream rng(seed);
    const auto steps = static_cast<std::uint64_t>(std::llround(plan.t_total / plan.dt));
    const std::size_t n_samples = steps / plan.sample_stride;

    std::vector<detail::TrajectoryResult> results(plan.n_traj);
    detail::run_pool(plan.n_traj, plan.jobs, [&](int t) {
        const auto traj = static_cast<std::uint32_t>(t);
        std::complex<double> u[3];
        detail::initial_state(flow, rng, traj, u);
        detail::PhaseTracker ph;
        ph.update(flow, u);
        const double m0 = (ph.phase[0] - ph.phase[1]) / std::numbers::sqrt2;
        const double p0 = (ph.phase[0] + ph.phase[1]) / std::numbers::sqrt2;
        auto& r = results[t];
        r.phase_minus_sq.reserve(n_samples);
        r.phase_plus_sq.reserve(n_samples);
        for (std::uint64_t s = 0; s < steps; ++s) {
            detail::em_step(flow, u, detail::normals6(rng, s, traj, 0), plan.dt);
            if ((s + 1) % plan.sample_stride != 0) continue;
            if (detail::out_of_bounds(flow, u)) {
                throw Error(ErrorKind::UnstableStep, "trajectory left the stability bound; reduce dt");
            }
            ph.update(flow, u);
            const double dm = (ph.phase[0] - ph.phase[1]) / std::numbers::sqrt2 - m0;
            const double dp = (ph.phase[0] + ph.phase[1]) / std::numbers::sqrt2 - p0;
            r.phase_minus_sq.push_back(dm * dm);
            r.phase_plus_sq.push_back(dp * dp);
        }
    });

    PhaseDiffusionResult out;
    out.times.resize(n_samples);
    out.msd_minus.assign(n_samples, 0.0);
    out.msd_plus.assign(n_samples, 0.0);
    for (std::size_t k = 0; k < n_samples; ++k) out.times[k] = (k + 1) * plan.sample_stride * plan.dt;
    for (const auto& r : results) {
        for (std::size_t k = 0; k < n_samples; ++k) {
            out.msd_minus[k] += r.phase_minus_sq[k];
            out.msd_plus[k] += r.phase_plus_sq[k];
        }
    }
    for (std::size_t k = 0; k < n_samples; ++k) {
        out.msd_minus[k] /= plan.n_traj;
        out.msd_plus[k] /= plan.n_traj;
    }
    const auto from = static_cast<std::size_t>(plan.burn_in * static_cast<double>(n_samples));
    out.fit_start = out.times[from];
    std::tie(out.slope, out.intercept) = detail::linear_fit(out.times, out.msd_minus, from);
    const std::size_t mid = from + (n_samples - from) / 2;
    for (std::size_t k = from; k < n_samples; ++k) (k < mid ? out.plus_early : out.plus_late) += out.msd_plus[k];
    out.plus_early /= static_cast<double>(mid - from);
    out.plus_late /= static_cast<double>(n_samples - mid);

    // Bootstrap over trajectories for the slope and the late phase-sum level.
    std::mt19937_64 boot(seed ^ 0x2545f4914f6cdd1dull);
    std::uniform_int_distribution<int> pick(0, plan.n_traj - 1);
    double s1 = 0, s2 = 0, l1 = 0, l2 = 0;
    std::vector<double> ym(n_samples), yp(n_samples);
    for (int b = 0; b < plan.bootstrap; ++b) {
        std::fill(ym.begin(), ym.end(), 0.0);
        std::fill(yp.begin(), yp.end(), 0.0);
        for (int i = 0; i < plan.n_traj; ++i) {
            const auto& r = results[pick(boot)];
            for (std::size_t k = from; k < n_samples; ++k) {
                ym[k] += r.phase_minus_sq[k];
                yp[k] += r.phase_plus_sq[k];
            }
        }
        const double slope = detail::linear_fit(out.times, ym, from).first / plan.n_traj;
        double late = 0;
        for (std::size_t k = mid; k < n_samples; ++k) late += yp[k];
        late /= plan.n_traj * static_cast<double>(n_samples - mid);
        s1 += slope;
        s2 += slope * slope;
        l1 += late;
        l2 += late * late;
    }
    const double nb = plan.bootstrap;
    out.slope_se = std::sqrt(std::max(0.0, (s2 - s1 * s1 / nb) / (nb - 1.0)));
    out.plus_late_se = std::sqrt(std::max(0.0, (l2 - l1 * l1 / nb) / (nb - 1.0)));
    return out;
}

// ---------------------------------------------------------------------------
// Comparison against a reference covariance
// ---------------------------------------------------------------------------

struct ComparisonEntry {
    std::string row, col;
    double estimate = 0.0;
    double reference = 0.0;
    double standard_error = 0.0;
    double z = 0.0;
};

struct ComparisonVerdict {
    bool pass = false;
    std::vector<ComparisonEntry> entries;
    double max_abs_z = 0.0;
    double mean_z = 0.0;
    bool sign_bias = false;
    int skipped_divergent = 0;
};

/// z-scores on the upper triangle of the shared quadratures. Entries the
/// reference flags as divergent are skipped. PASS needs every |z| < z_max
/// and |mean z| sqrt(n) < z_max.
[[nodiscard]] inline ComparisonVerdict compare(const EnsembleStats& stats, const CovarianceReport& reference,
                                               double z_max = 4.0) {
    if (stats.labels.empty() || stats.covariance.size() == 0) {
        throw Error(ErrorKind::LabelMismatch, "empty ensemble statistics");
    }
    auto find = [&](const std::string& s) {
        auto it = std::find(reference.labels.begin(), reference.labels.end(), s);
        if (it == reference.labels.end()) {
            throw Error(ErrorKind::LabelMismatch, "reference has no quadrature '" + s + "'");
        }
        return static_cast<Eigen::Index>(it - reference.labels.begin());
    };
    ComparisonVerdict v;
    const auto n = static_cast<Eigen::Index>(stats.labels.size());
    double zsum = 0.0;
    for (Eigen::Index a = 0; a < n; ++a) {
        const Eigen::Index ra = find(stats.labels[a]);
        for (Eigen::Index b = a; b < n; ++b) {
            const Eigen::Index rb = find(stats.labels[b]);
            if (reference.divergent.size() != 0 && reference.divergent(ra, rb)) {
                ++v.skipped_divergent;
                continue;
            }
            ComparisonEntry e;
            e.row = stats.labels[a];
            e.col = stats.labels[b];
            e.estimate = stats.covariance(a, b);
            e.reference = reference.sigma(ra, rb);
            e.standard_error = stats.standard_error(a, b);
            const double diff = e.estimate - e.reference;
            e.z = e.standard_error > 0.0 ? diff / e.standard_error
                                         : (diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff));
            v.max_abs_z = std::max(v.max_abs_z, std::abs(e.z));
            zsum += e.z;
            v.entries.push_back(e);
        }
    }
    if (v.entries.empty()) throw Error(ErrorKind::LabelMismatch, "no comparable entries");
    const double m = static_cast<double>(v.entries.size());
    v.mean_z = zsum / m;
    v.sign_bias = std::abs(v.mean_z) * std::sqrt(m) >= z_max;
    v.pass = v.max_abs_z < z_max && !v.sign_bias;
    return v;
}

}  // namespace ndpa
