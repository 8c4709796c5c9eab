#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "mou/errors.hpp"
#include "mou/matfun.hpp"
#include "mou/model.hpp"
#include "mou/rng.hpp"
#include "mou/timeseries.hpp"

namespace mou {

/// Random-network law: Bernoulli adjacency times log-normal weights,
/// normalized so the connectivity entries sum to the node count.
struct NetworkConfig {
    int node_count = 10;
    double density = 0.2;        // Bernoulli edge probability
    double weight_log_mean = 0.0;
    double weight_log_sd = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (node_count < 2) {
            throw ConfigError("NetworkConfig: node_count must be >= 2");
        }
        if (!(density > 0.0) || density > 1.0) {
            throw ConfigError("NetworkConfig: density must be in (0, 1]");
        }
        if (!(weight_log_sd >= 0.0)) {
            throw ConfigError("NetworkConfig: weight_log_sd must be nonnegative");
        }
    }
};

/// Draws C' = A .* W with A ~ Bern(p) off the diagonal and ln W ~ N(mu, sd),
/// then rescales so sum_ij C_ij equals the node count exactly.  An empty draw
/// (no edges) is redrawn from the advancing stream, at most 100 times.
///
/// Draw order is pinned: off-diagonal entries in row-major order; one uniform
/// per entry, then one normal when the edge exists.
inline RealMatrix gen_connectivity(const NetworkConfig& cfg, Rng& rng) {
    cfg.validate();
    const int m = cfg.node_count;
    for (int attempt = 0; attempt < 100; ++attempt) {
        RealMatrix c = RealMatrix::Zero(m, m);
        double total = 0.0;
        for (int i = 0; i < m; ++i) {
            for (int jj = 0; jj < m; ++jj) {
                if (i == jj) continue;
                if (rng.uniform01() < cfg.density) {
                    const double w =
                        std::exp(cfg.weight_log_mean + cfg.weight_log_sd * rng.normal());
                    c(i, jj) = w;
                    total += w;
                }
            }
        }
        if (total > 0.0) {
            return c * (static_cast<double>(m) / total);
        }
    }
    throw DegenerateInputError("gen_connectivity: 100 consecutive empty draws");
}

/// Per-node noise variances sigma_i^2 = 0.5 + 0.5 u_i with u_i ~ U(0,1);
/// every entry lies in the open interval (0.5, 1.0).
inline RealVector gen_sigma(int node_count, Rng& rng) {
    if (node_count < 1) {
        throw ConfigError("gen_sigma: node_count must be >= 1");
    }
    RealVector s(node_count);
    for (int i = 0; i < node_count; ++i) {
        s[i] = 0.5 + 0.5 * rng.uniform01_open();
    }
    return s;
}

struct StableDraw {
    ModelParams params;
    int rejected;  // unstable draws discarded before this one
};

/// Draws (C, Sigma) pairs until the implied Jacobian is Hurwitz-stable.
/// The generative law is marginally stable by construction (the normalization
/// pins the mean row sum of C at 1/tau_x), so a substantial fraction of draws
/// is rejected; the count is reported for logging.
inline StableDraw draw_stable_params(const NetworkConfig& cfg, double tau_x, Rng& rng,
                                     int max_tries = 200) {
    int rejected = 0;
    for (int attempt = 0; attempt < max_tries; ++attempt) {
        RealMatrix c = gen_connectivity(cfg, rng);
        RealVector sigma = gen_sigma(cfg.node_count, rng);
        try {
            return StableDraw{ModelParams(std::move(c), std::move(sigma), tau_x), rejected};
        } catch (const StabilityError&) {
            ++rejected;
        }
    }
    throw DegenerateInputError("draw_stable_params: no stable draw in " +
                               std::to_string(max_tries) + " tries");
}

/// Euler-Maruyama integration of the network model:
///   x_{k+1} = x_k + dt J x_k + sqrt(dt) diag(sigma_i) xi_k,  xi_k ~ N(0, I).
/// A burn-in of 10 tau_x seconds is discarded, then the state is recorded
/// every sample_interval; floor(duration_s / sample_interval) samples are
/// returned.
inline TimeSeries simulate(const ModelParams& params, double duration_s, double euler_dt,
                           double sample_interval, Rng& rng) {
    if (!(euler_dt > 0.0)) {
        throw ConfigError("simulate: euler_dt must be positive");
    }
    const double ratio = sample_interval / euler_dt;
    const long steps_per_sample = std::lround(ratio);
    if (steps_per_sample < 1 || std::abs(ratio - static_cast<double>(steps_per_sample)) > 1e-9) {
        throw ConfigError("simulate: sample_interval must be an integer multiple of euler_dt");
    }
    if (!(duration_s >= 2.0 * sample_interval)) {
        throw ConfigError("simulate: duration must cover at least two samples");
    }
    const Eigen::Index m = params.size();
    const long n_samples = static_cast<long>(std::floor(duration_s / sample_interval + 1e-9));
    const long burn_steps = static_cast<long>(std::ceil(10.0 * params.tau_x / euler_dt));
    const long total_steps = burn_steps + n_samples * steps_per_sample;

    const RealMatrix j = jacobian(params);
    const RealVector noise_scale = std::sqrt(euler_dt) * params.sigma_diag.cwiseSqrt();

    RealMatrix out(m, n_samples);
    RealVector x = RealVector::Zero(m);
    RealVector drift(m);
    long recorded = 0;
    for (long k = 1; k <= total_steps; ++k) {
        drift.noalias() = j * x;
        for (Eigen::Index i = 0; i < m; ++i) {
            x[i] += euler_dt * drift[i] + noise_scale[i] * rng.normal();
        }
        if (!x.allFinite()) {
            throw InstabilityError("simulate: non-finite state at step " + std::to_string(k));
        }
        if (k > burn_steps && (k - burn_steps) % steps_per_sample == 0) {
            out.col(recorded++) = x;
        }
    }
    return TimeSeries(std::move(out), sample_interval);
}

namespace detail {

/// Demeans each node over the full series.
inline RealMatrix demean(const RealMatrix& data) {
    return data.colwise() - RealVector(data.rowwise().mean());
}

/// Sum over n in [0, count) of x(:,n) x(:,n+lag)^T on already-demeaned data.
inline RealMatrix cross_sum(const RealMatrix& centered, Eigen::Index lag, Eigen::Index count) {
    return centered.leftCols(count) * centered.middleCols(lag, count).transpose();
}

inline RealMatrix mirror_upper(RealMatrix g) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        for (Eigen::Index jj = i + 1; jj < g.cols(); ++jj) {
            g(jj, i) = g(i, jj);
        }
    }
    return g;
}

}  // namespace detail

/// Empirical moments of a series after per-node demeaning:
///   Q0    = sum_n x_n x_n^T / (N - 1)            over all N samples,
///   Qtau  = sum_n x(n) x(n+lag)^T / (N - lag - 1) over the N - lag pairs,
/// with Qtau(i,j) pairing node i at the earlier time (the project-wide lag
/// convention).  Q0 is exactly symmetric by construction.
inline MomentPair empirical_moments(const TimeSeries& x, int lag_steps) {
    const Eigen::Index n = x.sample_count();
    if (lag_steps < 0) {
        throw DomainError("empirical_moments: lag_steps must be nonnegative");
    }
    if (n <= lag_steps + 1) {
        throw LengthError("empirical_moments: need more than lag_steps + 1 samples, got " +
                          std::to_string(n));
    }
    const RealMatrix centered = detail::demean(x.data);
    const RealMatrix q0 =
        detail::mirror_upper(detail::cross_sum(centered, 0, n)) / static_cast<double>(n - 1);
    RealMatrix qtau;
    if (lag_steps == 0) {
        qtau = q0;
    } else {
        qtau = detail::cross_sum(centered, lag_steps, n - lag_steps) /
               static_cast<double>(n - lag_steps - 1);
    }
    return MomentPair(q0, std::move(qtau), lag_steps * x.sample_interval,
                      MomentPair::Kind::empirical);
}

/// Moment pair in which the zero-lag accumulation runs over the same sample
/// range as the lagged one (the first N - lag samples, same normalizer).
/// This is the pair implied by the posterior-mean estimator; estimating from
/// it is exactly equivalent to that estimator.
inline MomentPair matching_moments(const TimeSeries& x, int lag_steps) {
    const Eigen::Index n = x.sample_count();
    if (lag_steps < 1) {
        throw DomainError("matching_moments: lag_steps must be positive");
    }
    if (n <= lag_steps + 1) {
        throw LengthError("matching_moments: need more than lag_steps + 1 samples, got " +
                          std::to_string(n));
    }
    const RealMatrix centered = detail::demean(x.data);
    const Eigen::Index count = n - lag_steps;
    const double norm = static_cast<double>(count - 1);
    const RealMatrix q0 = detail::mirror_upper(detail::cross_sum(centered, 0, count)) / norm;
    const RealMatrix qtau = detail::cross_sum(centered, lag_steps, count) / norm;
    return MomentPair(q0, qtau, lag_steps * x.sample_interval, MomentPair::Kind::empirical);
}

}  // namespace mou
