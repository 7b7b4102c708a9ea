#pragma once

#include <Eigen/Dense>

namespace ndpa::detail {

/// Solves M X + X M^T = -D for X via the Kronecker (vectorized) form.
/// Intended for the small (<= 6) systems used here.
inline Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& m, const Eigen::MatrixXd& d) {
    const Eigen::Index n = m.rows();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd op = Eigen::MatrixXd::Zero(n * n, n * n);
    // vec(M X) = (I kron M) vec X ; vec(X M^T) = (M kron I) vec X
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) {
            op.block(r * n, c * n, n, n) += id(r, c) * m + m(r, c) * id;
        }
    }
    const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(d.data(), n * n);
    const Eigen::VectorXd x = op.fullPivLu().solve(rhs);
    Eigen::MatrixXd out = Eigen::Map<const Eigen::MatrixXd>(x.data(), n, n);
    return 0.5 * (out + out.transpose());
}

}  // namespace ndpa::detail
