#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "mou/errors.hpp"
#include "mou/matfun.hpp"
#include "mou/timeseries.hpp"

namespace mou {

/// Generative parameter set of the network model: connectivity C (link
/// strength j->i in entry (i,j), zero diagonal), per-node noise variances, and
/// the shared node time constant.  Construction validates the invariants,
/// including Hurwitz stability of the implied Jacobian, so every instance is
/// usable in the stationary formulas.
struct ModelParams {
    RealMatrix connectivity;  // C, 1/s
    RealVector sigma_diag;    // sigma_i^2, activity^2/s
    double tau_x;             // s

    ModelParams(RealMatrix c, RealVector sigma, double tau)
        : connectivity(std::move(c)), sigma_diag(std::move(sigma)), tau_x(tau) {
        detail::require_square(connectivity, "ModelParams");
        detail::require_finite(connectivity, "ModelParams");
        if (sigma_diag.size() != connectivity.rows()) {
            throw ShapeError("ModelParams: sigma_diag length " +
                             std::to_string(sigma_diag.size()) + " vs " +
                             std::to_string(connectivity.rows()) + " nodes");
        }
        if (connectivity.diagonal().cwiseAbs().maxCoeff() != 0.0) {
            throw DomainError("ModelParams: diagonal of C must be exactly zero");
        }
        if (!(sigma_diag.minCoeff() > 0.0) || !sigma_diag.allFinite()) {
            throw DomainError("ModelParams: all noise variances must be positive");
        }
        if (!(tau_x > 0.0)) {
            throw DomainError("ModelParams: tau_x must be positive");
        }
        const RealMatrix j = -RealMatrix::Identity(size(), size()) / tau_x + connectivity;
        const double abscissa = spectral_abscissa(j);
        if (abscissa >= -1e-12) {
            throw StabilityError("ModelParams: Jacobian is not Hurwitz-stable "
                                 "(spectral abscissa " + std::to_string(abscissa) + ")");
        }
    }

    Eigen::Index size() const { return connectivity.rows(); }
};

/// Zero-lag and lagged covariance pair, theoretical or empirical.
struct MomentPair {
    enum class Kind { theoretical, empirical };

    RealMatrix q0;
    RealMatrix qtau;
    double tau;  // lag in seconds; zero only for the trivial lag-0 pair
    Kind kind;

    MomentPair(RealMatrix q0_in, RealMatrix qtau_in, double tau_in, Kind kind_in)
        : q0(std::move(q0_in)), qtau(std::move(qtau_in)), tau(tau_in), kind(kind_in) {
        detail::require_square(q0, "MomentPair");
        detail::require_same_shape(q0, qtau, "MomentPair");
        detail::require_finite(q0, "MomentPair");
        detail::require_finite(qtau, "MomentPair");
        if ((q0 - q0.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
            throw DomainError("MomentPair: q0 must be symmetric to 1e-10");
        }
        if (!(tau >= 0.0)) {
            throw DomainError("MomentPair: lag must be nonnegative");
        }
    }

    Eigen::Index size() const { return q0.rows(); }
};

/// System Jacobian J = -I/tau_x + C.
inline RealMatrix jacobian(const ModelParams& params) {
    return -RealMatrix::Identity(params.size(), params.size()) / params.tau_x +
           params.connectivity;
}

/// Stationary covariance Q0, from the Lyapunov equation J Q0 + Q0 J^T + Sigma = 0.
inline RealMatrix model_cov(const ModelParams& params) {
    return solve_lyapunov(jacobian(params), RealMatrix(params.sigma_diag.asDiagonal()));
}

/// Lagged covariance Q^tau = Q0 expm(J^T tau).  Convention fixed project-wide:
/// Q^tau(i,j) = E[x_i(t) x_j(t+tau)].
inline RealMatrix model_lagged_cov(const RealMatrix& q0, const RealMatrix& j, double tau) {
    detail::require_same_shape(q0, j, "model_lagged_cov");
    if (!(tau >= 0.0)) {
        throw DomainError("model_lagged_cov: tau must be nonnegative");
    }
    if (tau == 0.0) return q0;
    return q0 * mat_exp(RealMatrix(j.transpose() * tau));
}

/// One-step transition matrix Lambda = expm(J dt) of the sampled process.
/// For stable J and dt > 0 the spectral radius is checked to be below one.
inline RealMatrix propagator(const RealMatrix& j, double dt) {
    detail::require_square(j, "propagator");
    if (!(dt >= 0.0)) {
        throw DomainError("propagator: dt must be nonnegative");
    }
    RealMatrix lambda = mat_exp(RealMatrix(j * dt));
    if (dt > 0.0 && spectral_radius(lambda) >= 1.0 && spectral_abscissa(j) < -1e-12) {
        throw DomainError("propagator: spectral radius >= 1 for a stable Jacobian");
    }
    return lambda;
}

/// Covariance of the one-step transition residual, Xi = Q0 - Lambda Q0 Lambda^T.
inline RealMatrix conditional_cov(const RealMatrix& q0, const RealMatrix& lambda) {
    detail::require_same_shape(q0, lambda, "conditional_cov");
    if ((q0 - q0.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
        throw DomainError("conditional_cov: q0 must be symmetric");
    }
    RealMatrix xi = q0 - lambda * q0 * lambda.transpose();
    xi = 0.5 * (xi + xi.transpose());
    const double min_eig = min_symmetric_eigenvalue(xi);
    if (min_eig < -1e-10) {
        throw DomainError("conditional_cov: result not PSD (min eigenvalue " +
                          std::to_string(min_eig) + ")");
    }
    return xi;
}

/// Log posterior of the observed series under params with a uniform prior,
/// up to the evidence constant: the stationary Gaussian density of the first
/// sample plus the Gaussian transition densities of all subsequent steps.
inline double log_posterior(const TimeSeries& x, const ModelParams& params, double dt) {
    if (x.sample_count() < 2) {
        throw LengthError("log_posterior: need at least 2 samples");
    }
    if (x.node_count() != params.size()) {
        throw ShapeError("log_posterior: series has " + std::to_string(x.node_count()) +
                         " nodes, params " + std::to_string(params.size()));
    }
    const Eigen::Index m = x.node_count();
    const Eigen::Index n = x.sample_count();
    const RealMatrix j = jacobian(params);
    const RealMatrix lambda = propagator(j, dt);
    const RealMatrix q0 = model_cov(params);
    const RealMatrix xi = conditional_cov(q0, lambda);

    Eigen::LLT<RealMatrix> llt_q0(q0);
    if (llt_q0.info() != Eigen::Success) {
        throw SingularityError("log_posterior: Q0 is singular", 0.0);
    }
    Eigen::LLT<RealMatrix> llt_xi(xi);
    if (llt_xi.info() != Eigen::Success) {
        throw SingularityError("log_posterior: Xi is singular", 0.0);
    }

    auto logdet = [](const Eigen::LLT<RealMatrix>& llt) {
        return 2.0 * RealVector(llt.matrixL().toDenseMatrix().diagonal()).array().log().sum();
    };
    const double log2pi = std::log(2.0 * M_PI);

    // stationary term for the first sample
    const RealVector x1 = x.data.col(0);
    double lp = -0.5 * (m * log2pi + logdet(llt_q0) + x1.dot(llt_q0.solve(x1)));

    // transition terms; Delta_n = x^{n+1} - Lambda x^n
    const RealMatrix deltas =
        x.data.rightCols(n - 1) - lambda * x.data.leftCols(n - 1);
    const double quad = deltas.cwiseProduct(llt_xi.solve(deltas)).sum();
    lp += -0.5 * (static_cast<double>(n - 1) * (m * log2pi + logdet(llt_xi)) + quad);
    return lp;
}

/// Theoretical moment pair of the model at the given lag.
inline MomentPair theoretical_moments(const ModelParams& params, double tau) {
    const RealMatrix q0 = model_cov(params);
    return MomentPair(q0, model_lagged_cov(q0, jacobian(params), tau), tau,
                      MomentPair::Kind::theoretical);
}

}  // namespace mou
