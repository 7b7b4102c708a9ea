// Small stochastic ensemble against the linear engine at a few drives.
//
//   demo_oracle_check [n_traj seed]

#include <cstdio>
#include <cstdlib>

#include "ndpa/ndpa.hpp"

int main(int argc, char** argv) {
    const int n_traj = argc > 1 ? std::atoi(argv[1]) : 400;
    const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 1;
    const auto sys = ndpa::reference_system(1.0, 1e3, {}, 1e2);
    int failures = 0;
    for (double mu : {0.0, 0.5, 2.0}) {
        const ndpa::DriveConfig d{mu, 0.0, 0.0};
        const auto stats = ndpa::simulate(sys, d, ndpa::recommended_plan(sys, d, n_traj, seed));
        const auto v = ndpa::compare(stats, ndpa::variance_integral(ndpa::membrane_model(sys, d)));
        std::printf("mu = %.1f  max|z| = %.2f  %s\n", mu, v.max_abs_z, v.pass ? "ok" : "MISMATCH");
        for (const auto& e : v.entries) {
            if (e.row != e.col) continue;
            std::printf("    var %-3s  sim %.4f +- %.4f   engine %.4f\n", e.row.c_str(), e.estimate, e.standard_error,
                        e.reference);
        }
        failures += v.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
