// Walks the drive across the parametric threshold for the preset system and
// prints the fixed point next to the steady-state collective variances.

#include <cstdio>

#include "ndpa/ndpa.hpp"

int main() {
    const ndpa::SystemConfig sys = ndpa::load_presets().system();
    std::printf("critical pump amplitude: %.6g m\n\n", ndpa::critical_pump_amplitude(sys));
    std::printf("%6s %12s %12s %10s %10s %10s %10s\n", "mu", "|a_s| (m)", "|a_i| (m)", "x+", "x-", "y+", "y-");
    for (double mu : ndpa::linspace(0.0, 2.0, 21)) {
        const auto st = ndpa::solve_steady_state(sys, {mu, 0.0, 0.0});
        const auto rep = ndpa::engine_covariance(sys, mu);
        std::printf("%6.2f %12.5g %12.5g %10.4f %10.4f %10.4f %10.4f\n", mu, std::abs(st.a_s), std::abs(st.a_i),
                    rep.var("x+"), rep.var("x-"), rep.var("y+"), rep.var("y-"));
    }
    return 0;
}
