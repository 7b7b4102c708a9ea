// Squeezing budget for an imperfect mode pair: best two-mode squeezing from
// mismatch alone, then the extra cost of pump detuning and of a finite
// measurement time.
//
//   demo_squeezing_budget [delta_gamma delta_omega detuning_over_gamma tau_m_s]

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "ndpa/ndpa.hpp"

namespace {

double db(double v) { return -10.0 * std::log10(v); }

}  // namespace

int main(int argc, char** argv) {
    const double dg = argc > 1 ? std::atof(argv[1]) : 0.31;
    const double dw = argc > 2 ? std::atof(argv[2]) : 0.09;
    const double det = argc > 3 ? std::atof(argv[3]) : 0.25;
    const double tau = argc > 4 ? std::atof(argv[4]) : 300.0;

    try {
        const auto peak = ndpa::closed_form::peak_squeezing({dg, dw});
        std::printf("mismatch (dg=%.3f, dw=%.3f): best sigma = %.5f (%.2f dB) at mu = %.4f%s\n", dg, dw, peak.sigma,
                    db(peak.sigma), peak.mu, peak.interior ? "" : " (threshold edge)");

        const double detuned = ndpa::closed_form::detuned_peak_squeezing(det, 1.0);
        std::printf("detuning %.3f gamma, matched pair: best sigma = %.5f (%.2f dB)\n", det, detuned, db(detuned));

        const auto presets = ndpa::load_presets();
        const double gamma = 2.0 * std::numbers::pi * 0.1;
        const auto sys = ndpa::with_asymmetry(presets.system(), {dg, dw}, gamma);
        const auto fin = ndpa::engine_covariance(sys, peak.mu, ndpa::Band::measurement_time(tau));
        const auto ss = ndpa::engine_covariance(sys, peak.mu);
        std::printf("tau_m = %.0f s at that mu: squeezed y- %.5f (steady %.5f)\n", tau, fin.var("y-"), ss.var("y-"));
    } catch (const ndpa::Error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    }
    return 0;
}
