#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature for matrix-valued
// integrands. Error control only considers entries selected by a mask so
// that entries known to diverge do not drive the subdivision.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <tuple>
#include <utility>
#include <vector>

namespace ndpa::detail {

struct QuadratureResult {
    Eigen::MatrixXd value;
    double error = 0.0;
    int evaluations = 0;
    int intervals = 0;
};

struct QuadratureOptions {
    double rel_tol = 1e-13;
    double abs_tol = 0.0;
    int max_intervals = 4000;
};

namespace gk15 {
inline constexpr std::array<double, 8> xk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> wk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the nodes xk[1], xk[3], xk[5], xk[7].
inline constexpr std::array<double, 4> wg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
}  // namespace gk15

struct Panel {
    double a = 0.0;
    double b = 0.0;
    Eigen::MatrixXd value;
    double error = 0.0;
    bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk15_panel(const F& f, double a, double b, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    Eigen::MatrixXd fc = f(c);
    Eigen::MatrixXd kron = gk15::wk[7] * fc;
    Eigen::MatrixXd gauss = gk15::wg[3] * fc;
    for (int k = 0; k < 7; ++k) {
        const double dx = h * gk15::xk[k];
        Eigen::MatrixXd sum = f(c - dx) + f(c + dx);
        kron += gk15::wk[k] * sum;
        if (k % 2 == 1) gauss += gk15::wg[k / 2] * sum;
    }
    Panel p;
    p.a = a;
    p.b = b;
    p.value = h * kron;
    const Eigen::ArrayXXd diff = (h * (kron - gauss)).array().abs();
    p.error = mask.select(diff, 0.0).maxCoeff();
    return p;
}

/// Integrates f over consecutive intervals given by sorted breakpoints.
template <class F>
QuadratureResult integrate_adaptive(const F& f, std::vector<double> breakpoints,
                                    const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask,
                                    const QuadratureOptions& opt = {}) {
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
    std::priority_queue<Panel> heap;
    QuadratureResult out;
    for (std::size_t k = 0; k + 1 < breakpoints.size(); ++k) {
        heap.push(gk15_panel(f, breakpoints[k], breakpoints[k + 1], mask));
        out.evaluations += 15;
    }
    auto totals = [&]() {
        std::priority_queue<Panel> copy = heap;
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(mask.rows(), mask.cols());
        double err = 0.0;
        while (!copy.empty()) {
            sum += copy.top().value;
            err += copy.top().error;
            copy.pop();
        }
        return std::pair{sum, err};
    };
    auto [sum, err] = totals();
    while (static_cast<int>(heap.size()) < opt.max_intervals) {
        const double scale = mask.select(sum.array().abs(), 0.0).maxCoeff();
        if (err <= std::max(opt.abs_tol, opt.rel_tol * scale)) break;
        Panel worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            heap.push(worst);
            break;
        }
        Panel left = gk15_panel(f, worst.a, mid, mask);
        Panel right = gk15_panel(f, mid, worst.b, mask);
        out.evaluations += 30;
        sum += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(std::move(left));
        heap.push(std::move(right));
    }
    // Re-sum from scratch to avoid drift from the running update.
    std::tie(out.value, out.error) = totals();
    out.intervals = static_cast<int>(heap.size());
    return out;
}

}  // namespace ndpa::detail
