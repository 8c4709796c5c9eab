#pragma once

// Independent brute-force reference implementations used only by tests.
// These deliberately avoid the library's computational paths.

#include <Eigen/Dense>

#include "mou/rng.hpp"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Truncated Taylor series for exp(A). Adequate for modest-norm matrices.
inline MatrixXd taylor_expm(const MatrixXd& a, int terms = 60) {
    MatrixXd sum = MatrixXd::Identity(a.rows(), a.cols());
    MatrixXd term = MatrixXd::Identity(a.rows(), a.cols());
    for (int k = 1; k <= terms; ++k) {
        term = (term * a) / static_cast<double>(k);
        sum += term;
    }
    return sum;
}

/// Solves J Q + Q J^T + S = 0 by vectorization:
/// (I (x) J + J (x) I) vec(Q) = -vec(S).
inline MatrixXd kron_lyapunov(const MatrixXd& j, const MatrixXd& s) {
    const Eigen::Index n = j.rows();
    MatrixXd big = MatrixXd::Zero(n * n, n * n);
    // vec is column-major: vec(Q)[i + n*c] = Q(i, c).
    // (J Q)(i,c)    -> couples (i,c) with (k,c) via J(i,k)
    // (Q J^T)(i,c)  -> couples (i,c) with (i,k) via J(c,k)
    for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index row = i + n * c;
            for (Eigen::Index k = 0; k < n; ++k) {
                big(row, k + n * c) += j(i, k);
                big(row, i + n * k) += j(c, k);
            }
        }
    }
    VectorXd rhs = -Eigen::Map<const VectorXd>(s.data(), n * n);
    VectorXd q = big.fullPivLu().solve(rhs);
    return Eigen::Map<const MatrixXd>(q.data(), n, n);
}

/// Direct two-pass Pearson correlation.
inline double direct_pearson(const VectorXd& a, const VectorXd& b) {
    const double ma = a.mean();
    const double mb = b.mean();
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

/// Random matrix with entries uniform in [-scale, scale].
inline MatrixXd random_matrix(Eigen::Index n, mou::Rng& rng, double scale = 1.0) {
    MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            m(i, j) = scale * (2.0 * rng.uniform01() - 1.0);
        }
    }
    return m;
}

/// Random Hurwitz-stable matrix: random entries shifted by a diagonal margin.
inline MatrixXd random_stable(Eigen::Index n, mou::Rng& rng, double margin = 0.5) {
    MatrixXd m = random_matrix(n, rng, 1.0);
    const double shift = m.cwiseAbs().rowwise().sum().maxCoeff() + margin;
    m.diagonal().array() -= shift;  // strictly diagonally dominant -> stable
    return m;
}

/// Random symmetric positive semidefinite matrix.
inline MatrixXd random_psd(Eigen::Index n, mou::Rng& rng) {
    MatrixXd g = random_matrix(n, rng, 1.0);
    return g * g.transpose();
}

}  // namespace oracle
