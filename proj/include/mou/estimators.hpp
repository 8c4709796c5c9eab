#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mou/errors.hpp"
#include "mou/matfun.hpp"
#include "mou/model.hpp"
#include "mou/synth.hpp"
#include "mou/timeseries.hpp"

namespace mou {

enum class Method { moments, bayesian, lyapunov };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::moments: return "moments";
        case Method::bayesian: return "bayesian";
        case Method::lyapunov: return "lyapunov";
    }
    return "?";
}

inline Method method_from_string(const std::string& s) {
    if (s == "moments") return Method::moments;
    if (s == "bayesian") return Method::bayesian;
    if (s == "lyapunov") return Method::lyapunov;
    throw ConfigError("unknown method '" + s + "'");
}

/// Estimator output.  j_hat keeps the full (possibly complex) Jacobian
/// estimate; c_hat is the real off-diagonal part with the diagonal forced to
/// zero.  For the matrix-log based estimators imag_ratio carries the
/// imaginary/real Frobenius-norm ratio of j_hat, the diagnostic for their
/// numerical failure mode; the all-real iterative fit reports zero.
struct Estimate {
    ComplexMatrix j_hat;
    RealMatrix c_hat;
    RealVector sigma_hat;
    double tau_x_hat = 0.0;
    double imag_ratio = 0.0;
    Method method = Method::moments;
    int iterations = 0;
    std::optional<double> fit_value;               // final V for the iterative fit
    std::optional<double> sigma_offdiag_residual;  // ||offdiag(Sigma_hat)||_F, moment-based paths
};

/// Knobs of the iterative covariance fit.
struct LyapunovFitConfig {
    double learning_rate_j = 1e-2;
    double learning_rate_sigma = 1e-1;
    int max_iters = 10000;
    int stop_patience = 1000;  // iterations without best-V improvement before stopping
    double tau_x_init = 1.0;
    std::optional<RealMatrix> mask;  // binary structural adjacency, zero diagonal
    bool clamp_nonnegative = true;

    void validate(Eigen::Index m) const {
        if (!(learning_rate_j > 0.0) || !(learning_rate_sigma > 0.0)) {
            throw ConfigError("LyapunovFitConfig: learning rates must be positive");
        }
        if (max_iters < 1) {
            throw ConfigError("LyapunovFitConfig: max_iters must be >= 1");
        }
        if (stop_patience < 1) {
            throw ConfigError("LyapunovFitConfig: stop_patience must be >= 1");
        }
        if (!(tau_x_init > 0.0)) {
            throw ConfigError("LyapunovFitConfig: tau_x_init must be positive");
        }
        if (mask) {
            if (mask->rows() != m || mask->cols() != m) {
                throw ShapeError("LyapunovFitConfig: mask shape mismatch");
            }
            if (((mask->array() != 0.0) && (mask->array() != 1.0)).any()) {
                throw DomainError("LyapunovFitConfig: mask must be binary");
            }
            if (mask->diagonal().cwiseAbs().maxCoeff() != 0.0) {
                throw DomainError("LyapunovFitConfig: mask diagonal must be zero");
            }
        }
    }
};

/// Full noise-matrix reconstruction -J Q0 - Q0 J^T from a Jacobian estimate.
inline RealMatrix sigma_matrix_from_estimate(const RealMatrix& j_hat_real,
                                             const RealMatrix& q0) {
    detail::require_same_shape(j_hat_real, q0, "sigma_from_estimate");
    return -j_hat_real * q0 - q0 * j_hat_real.transpose();
}

/// Diagonal of the reconstructed noise matrix (the model constrains Sigma to
/// be diagonal; the off-diagonal residual is reported by moments_estimate).
inline RealVector sigma_from_estimate(const RealMatrix& j_hat_real, const RealMatrix& q0) {
    return sigma_matrix_from_estimate(j_hat_real, q0).diagonal();
}

namespace detail {

inline Estimate estimate_from_jhat(ComplexMatrix j_hat, const RealMatrix& q0, Method method) {
    const Eigen::Index m = j_hat.rows();
    Estimate est;
    est.method = method;
    est.imag_ratio = imag_real_ratio(j_hat);
    est.j_hat = std::move(j_hat);
    const RealMatrix j_real = est.j_hat.real();
    est.c_hat = j_real;
    est.c_hat.diagonal().setZero();
    const RealMatrix sigma_full = sigma_matrix_from_estimate(j_real, q0);
    est.sigma_hat = sigma_full.diagonal();
    RealMatrix sigma_off = sigma_full;
    sigma_off.diagonal().setZero();
    est.sigma_offdiag_residual = sigma_off.norm();
    est.tau_x_hat = -static_cast<double>(m) / j_real.trace();
    est.iterations = 0;
    return est;
}

}  // namespace detail

/// Closed-form inversion of the lagged-covariance relation ("direct
/// estimation"): under the project lag convention Q^tau = Q0 expm(J^T tau),
/// so J_hat = logm((Q^tau)^T (Q0)^-1) / tau.  The complex logarithm is kept
/// in j_hat; c_hat takes its real part.
inline Estimate moments_estimate(const MomentPair& moments) {
    if (!(moments.tau > 0.0)) {
        throw DomainError("moments_estimate: moment pair must have a positive lag");
    }
    Eigen::LLT<RealMatrix> llt(moments.q0);
    if (llt.info() != Eigen::Success) {
        throw SingularityError("moments_estimate: q0 is singular or not positive definite",
                               0.0);
    }
    // lambda_tau = (Q^tau)^T (Q0)^-1, computed as (Q0^-1 Q^tau)^T (Q0 symmetric)
    const RealMatrix lambda_tau = llt.solve(moments.qtau).transpose();
    ComplexMatrix j_hat = mat_log(lambda_tau) / moments.tau;
    return detail::estimate_from_jhat(std::move(j_hat), moments.q0, Method::moments);
}

/// Posterior mean under a uniform prior: Lambda_hat = T1 (T0)^-1 over the
/// demeaned one-step transitions, then J_hat = logm(Lambda_hat) / dt.  The
/// accumulations are shared with matching_moments, so this is exactly
/// moments_estimate applied to that pair.
inline Estimate bayesian_estimate(const TimeSeries& x) {
    if (x.sample_count() < 3) {
        throw LengthError("bayesian_estimate: need at least 3 samples");
    }
    Estimate est = moments_estimate(matching_moments(x, 1));
    est.method = Method::bayesian;
    return est;
}

/// Iterative covariance fit: gradient-style updates of (C, Sigma) that
/// minimize V = ||Q0 - Q0_hat||_F^2 + ||Q^tau - Q^tau_hat||_F^2, with the
/// diagonal of C held at zero, optional nonnegativity clamping, optional
/// structural masking, and best-iterate selection.
///
/// The Jacobian update inverts the lagged relation to first order given that
/// the Sigma update already absorbs the zero-lag mismatch:
///   dJ = [(Q0)^-1 (dQtau expm(-J^T tau) - dQ0)]^T / tau
///   dSigma = -J dQ0 - dQ0 J^T
/// A C-step that would leave the stable region is halved once and, if still
/// unstable, skipped for that iteration (the Sigma step never affects
/// stability and is always applied).
inline Estimate lyapunov_fit(const MomentPair& moments, const LyapunovFitConfig& cfg = {}) {
    const Eigen::Index m = moments.size();
    cfg.validate(m);
    if (!(moments.tau > 0.0)) {
        throw DomainError("lyapunov_fit: moment pair must have a positive lag");
    }
    if (min_symmetric_eigenvalue(moments.q0) <= 0.0) {
        throw SingularityError("lyapunov_fit: q0 must be positive definite", 0.0);
    }

    const double tau = moments.tau;
    const double tau_x = cfg.tau_x_init;
    const RealMatrix ident = RealMatrix::Identity(m, m);

    RealMatrix c = RealMatrix::Zero(m, m);
    RealVector sigma =
        (2.0 * moments.q0.diagonal() / tau_x).cwiseMax(1e-6);  // decoupled-model init

    auto apply_constraints = [&](RealMatrix& cand) {
        cand.diagonal().setZero();
        if (cfg.clamp_nonnegative) {
            cand = cand.cwiseMax(0.0);
        }
        if (cfg.mask) {
            cand = cand.cwiseProduct(*cfg.mask);
        }
    };

    double best_v = std::numeric_limits<double>::infinity();
    RealMatrix best_c = c;
    RealVector best_sigma = sigma;
    double initial_v = 0.0;
    int since_best = 0;
    int iterations = 0;
    std::vector<double> v_trace;
    v_trace.reserve(static_cast<std::size_t>(cfg.max_iters));

    // pending C-step for the rejection ladder: factors 1, 1/2, then skip
    RealMatrix pending_base = c;
    RealMatrix pending_dj;
    int pending_stage = -1;  // -1: none, 0: full applied, 1: halved applied

    for (int it = 0; it < cfg.max_iters; ++it) {
        iterations = it + 1;
        RealMatrix q0;
        try {
            q0 = solve_lyapunov(-ident / tau_x + c, RealMatrix(sigma.asDiagonal()));
        } catch (const StabilityError&) {
            if (pending_stage == 0) {
                // halve the rejected C-step once
                c = pending_base + (0.5 * cfg.learning_rate_j) * pending_dj;
                apply_constraints(c);
                pending_stage = 1;
                continue;
            }
            if (pending_stage == 1) {
                // still unstable: skip the C-step entirely this iteration
                c = pending_base;
                pending_stage = -1;
                continue;
            }
            throw InstabilityError(
                "lyapunov_fit: iterate left the stable region at iteration " +
                std::to_string(it));
        }
        pending_stage = -1;

        const RealMatrix j = -ident / tau_x + c;
        const RealMatrix e = mat_exp(RealMatrix(j.transpose() * tau));
        const RealMatrix qtau = q0 * e;
        const RealMatrix dq0 = moments.q0 - q0;
        const RealMatrix dqt = moments.qtau - qtau;
        const double v = dq0.squaredNorm() + dqt.squaredNorm();
        v_trace.push_back(v);
        if (it == 0) initial_v = v;

        if (v < best_v) {
            best_v = v;
            best_c = c;
            best_sigma = sigma;
            since_best = 0;
        } else {
            if (++since_best >= cfg.stop_patience) break;
        }
        if (it >= 10 * cfg.stop_patience && best_v >= initial_v) {
            throw ConvergenceError(
                "lyapunov_fit: V has not decreased after " + std::to_string(it) +
                    " iterations",
                v_trace);
        }

        // update directions at the current iterate
        Eigen::PartialPivLU<RealMatrix> lu_e(e);
        const RealMatrix dj =
            (q0.llt().solve(dqt * lu_e.inverse() - dq0)).transpose() / tau;
        const RealVector dsigma = (-j * dq0 - dq0 * j.transpose()).diagonal();

        sigma = (sigma + cfg.learning_rate_sigma * dsigma).cwiseMax(1e-6);
        pending_base = c;
        pending_dj = dj;
        c = pending_base + cfg.learning_rate_j * dj;
        apply_constraints(c);
        pending_stage = 0;
    }

    Estimate est;
    est.method = Method::lyapunov;
    est.c_hat = best_c;
    const RealMatrix j_best = -ident / tau_x + best_c;
    est.j_hat = j_best.cast<Complex>();
    est.sigma_hat = best_sigma;
    est.tau_x_hat = -static_cast<double>(m) / j_best.trace();
    est.imag_ratio = 0.0;
    est.iterations = iterations;
    est.fit_value = best_v;
    return est;
}

/// Estimation accuracy as Pearson correlations: connectivity over the
/// off-diagonal entries, noise variances over the per-node vectors.
struct AccuracyResult {
    double accuracy_c;
    double accuracy_sigma;
};

inline AccuracyResult accuracy(const RealMatrix& c_true, const RealVector& sigma_true,
                               const Estimate& est) {
    detail::require_same_shape(c_true, est.c_hat, "accuracy");
    if (sigma_true.size() != est.sigma_hat.size()) {
        throw ShapeError("accuracy: sigma length mismatch");
    }
    return AccuracyResult{pearson(offdiagonal(c_true), offdiagonal(est.c_hat)),
                          pearson(sigma_true, est.sigma_hat)};
}

}  // namespace mou
