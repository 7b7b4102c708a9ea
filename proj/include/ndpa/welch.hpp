#pragma once

// Welch cross-spectral estimate of a multichannel real series. Output is the
// two-sided density per unit angular frequency on the non-negative grid
// w_k = 2 pi k / (L dt), k = 0 .. L/2, so integrating over the full line
// approximates the variance.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "ndpa/error.hpp"

namespace ndpa {

struct WelchOptions {
    int segment = 1024;    ///< samples per segment
    double overlap = 0.5;  ///< fraction of a segment shared with the next
};

struct WelchEstimate {
    std::vector<double> frequencies;
    std::vector<Eigen::MatrixXcd> values;
    int segments = 0;
};

/// `samples` holds one channel per row, one time sample per column.
[[nodiscard]] inline WelchEstimate welch(const Eigen::MatrixXd& samples, double dt, const WelchOptions& opt) {
    const Eigen::Index channels = samples.rows();
    const int len = opt.segment;
    if (len < 8 || !(opt.overlap >= 0.0 && opt.overlap < 1.0)) {
        throw Error(ErrorKind::InvalidParameter, "Welch segment must be >= 8 samples and overlap in [0, 1)");
    }
    if (samples.cols() < len) {
        throw Error(ErrorKind::InsufficientDuration, "series shorter than one Welch segment");
    }
    const int hop = std::max(1, static_cast<int>(std::lround(len * (1.0 - opt.overlap))));
    Eigen::VectorXd window(len);
    for (int n = 0; n < len; ++n) window(n) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / len);
    const double norm = dt / (2.0 * std::numbers::pi * window.squaredNorm());

    const int bins = len / 2 + 1;
    WelchEstimate out;
    out.values.assign(bins, Eigen::MatrixXcd::Zero(channels, channels));
    for (int k = 0; k < bins; ++k) out.frequencies.push_back(2.0 * std::numbers::pi * k / (len * dt));

    Eigen::FFT<double> fft;
    std::vector<double> buf(len);
    std::vector<std::complex<double>> spec;
    Eigen::MatrixXcd coeffs(channels, bins);
    for (Eigen::Index start = 0; start + len <= samples.cols(); start += hop) {
        for (Eigen::Index c = 0; c < channels; ++c) {
            for (int n = 0; n < len; ++n) buf[n] = window(n) * samples(c, start + n);
            fft.fwd(spec, buf);
            for (int k = 0; k < bins; ++k) coeffs(c, k) = spec[k];
        }
        for (int k = 0; k < bins; ++k) out.values[k] += coeffs.col(k) * coeffs.col(k).adjoint();
        ++out.segments;
    }
    for (auto& v : out.values) v *= norm / out.segments;
    return out;
}

}  // namespace ndpa
