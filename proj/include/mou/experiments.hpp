#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mou/estimators.hpp"
#include "mou/model.hpp"
#include "mou/rng.hpp"
#include "mou/synth.hpp"

namespace mou {

namespace detail {

/// Runs fn(0..count-1) on up to `workers` threads.  Each job owns its slot of
/// the result container, so outputs are ordered by index regardless of
/// scheduling.
inline void parallel_for(std::size_t count, int workers,
                         const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = static_cast<int>(
        std::min<std::size_t>(count, static_cast<std::size_t>(workers)));
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace detail

/// One sweep trial result; NaN accuracies mark a failed trial.
struct AccuracyRecord {
    int m = 0;
    int n = 0;
    Method method = Method::bayesian;
    std::uint64_t seed = 0;
    double accuracy_c = std::numeric_limits<double>::quiet_NaN();
    double accuracy_sigma = std::numeric_limits<double>::quiet_NaN();
    double imag_ratio = std::numeric_limits<double>::quiet_NaN();
    double wall_time_ms = 0.0;
};

/// Similarity of each intermediate quantity of the moment/posterior pipeline
/// to its theoretical counterpart, per trial.
struct DiagnosisRecord {
    int m = 0;
    std::uint64_t seed = 0;
    double corr_precision = std::numeric_limits<double>::quiet_NaN();
    double corr_lagged = std::numeric_limits<double>::quiet_NaN();
    double corr_lambda = std::numeric_limits<double>::quiet_NaN();
    double corr_logm = std::numeric_limits<double>::quiet_NaN();
    double corr_c = std::numeric_limits<double>::quiet_NaN();
    double imag_ratio = std::numeric_limits<double>::quiet_NaN();
};

/// Shared knobs of the synthetic-data protocol.
struct SweepOptions {
    double density = 0.2;
    double tau_x = 1.0;
    double euler_dt = 0.05;
    double sample_interval = 1.0;
    int lag_steps = 1;
    LyapunovFitConfig fit;
    int workers = 1;
};

/// One full paired trial: draw a stable system, simulate n samples, run both
/// estimators on the same series.  Deterministic given (m, n, trial_seed).
inline std::pair<AccuracyRecord, AccuracyRecord> run_accuracy_trial(
    int m, int n, std::uint64_t trial_seed, const SweepOptions& opts = {}) {
    AccuracyRecord bayes;
    bayes.m = m;
    bayes.n = n;
    bayes.method = Method::bayesian;
    bayes.seed = trial_seed;
    AccuracyRecord lyap = bayes;
    lyap.method = Method::lyapunov;

    Rng rng(trial_seed);
    try {
        StableDraw draw = draw_stable_params(
            NetworkConfig{m, opts.density, 0.0, 1.0, trial_seed}, opts.tau_x, rng);
        TimeSeries x = simulate(draw.params, n * opts.sample_interval, opts.euler_dt,
                                opts.sample_interval, rng);

        double t0 = detail::now_ms();
        try {
            Estimate est = bayesian_estimate(x);
            AccuracyResult acc = accuracy(draw.params.connectivity, draw.params.sigma_diag, est);
            bayes.accuracy_c = acc.accuracy_c;
            bayes.accuracy_sigma = acc.accuracy_sigma;
            bayes.imag_ratio = est.imag_ratio;
        } catch (const Error&) {
        }
        bayes.wall_time_ms = detail::now_ms() - t0;

        t0 = detail::now_ms();
        try {
            LyapunovFitConfig fit_cfg = opts.fit;
            fit_cfg.tau_x_init = opts.tau_x;
            Estimate est = lyapunov_fit(empirical_moments(x, opts.lag_steps), fit_cfg);
            AccuracyResult acc = accuracy(draw.params.connectivity, draw.params.sigma_diag, est);
            lyap.accuracy_c = acc.accuracy_c;
            lyap.accuracy_sigma = acc.accuracy_sigma;
            lyap.imag_ratio = 0.0;
        } catch (const Error&) {
        }
        lyap.wall_time_ms = detail::now_ms() - t0;
    } catch (const Error&) {
        // draw or simulation failed: both records keep their NaN sentinels
    }
    return {bayes, lyap};
}

namespace detail {

inline std::vector<AccuracyRecord> sweep_impl(const std::vector<int>& m_values,
                                              const std::vector<int>& n_values,
                                              int repeats, std::uint64_t base_seed,
                                              const SweepOptions& opts) {
    const std::size_t cells = m_values.size();  // m_values and n_values are zipped 1:1
    const std::size_t trials = cells * static_cast<std::size_t>(repeats);
    std::vector<AccuracyRecord> records(2 * trials);
    parallel_for(trials, opts.workers, [&](std::size_t t) {
        const std::size_t cell = t / repeats;
        auto [bayes, lyap] = run_accuracy_trial(m_values[cell], n_values[cell],
                                                base_seed + t, opts);
        records[2 * t] = bayes;
        records[2 * t + 1] = lyap;
    });
    return records;
}

}  // namespace detail

/// Accuracy versus network size at fixed sample count.  Emits two records per
/// (m, repeat): one per estimator, paired on the same simulated series.
/// Failed trials are kept as NaN rows.  trial_seed = base_seed + trial_index.
inline std::vector<AccuracyRecord> sweep_nodes(const std::vector<int>& m_values, int n_fixed,
                                               int repeats, std::uint64_t base_seed,
                                               const SweepOptions& opts = {}) {
    for (int m : m_values) {
        if (m < 2) throw ConfigError("sweep_nodes: all m must be >= 2");
    }
    if (repeats < 1) throw ConfigError("sweep_nodes: repeats must be >= 1");
    std::vector<int> n_values(m_values.size(), n_fixed);
    return detail::sweep_impl(m_values, n_values, repeats, base_seed, opts);
}

/// Accuracy versus sample count at fixed network size.
inline std::vector<AccuracyRecord> sweep_samples(const std::vector<int>& n_values, int m_fixed,
                                                 int repeats, std::uint64_t base_seed,
                                                 const SweepOptions& opts = {}) {
    for (int n : n_values) {
        if (n < 3) throw ConfigError("sweep_samples: all n must be >= 3");
    }
    if (repeats < 1) throw ConfigError("sweep_samples: repeats must be >= 1");
    std::vector<int> m_values(n_values.size(), m_fixed);
    return detail::sweep_impl(m_values, n_values, repeats, base_seed, opts);
}

/// One failure-diagnosis trial: correlate the empirical precision, lagged
/// covariance, propagator and its matrix log against their theoretical
/// counterparts, and record the imaginary/real ratio of the log-based
/// Jacobian estimate.
inline DiagnosisRecord run_diagnosis_trial(int m, int n, std::uint64_t trial_seed,
                                           const SweepOptions& opts = {}) {
    DiagnosisRecord rec;
    rec.m = m;
    rec.seed = trial_seed;
    Rng rng(trial_seed);
    try {
        StableDraw draw = draw_stable_params(
            NetworkConfig{m, opts.density, 0.0, 1.0, trial_seed}, opts.tau_x, rng);
        TimeSeries x = simulate(draw.params, n * opts.sample_interval, opts.euler_dt,
                                opts.sample_interval, rng);
        const double dt = opts.lag_steps * opts.sample_interval;

        const RealMatrix j = jacobian(draw.params);
        const RealMatrix q0 = model_cov(draw.params);
        const RealMatrix prec = q0.inverse();
        const RealMatrix qt = model_lagged_cov(q0, j, dt);
        const RealMatrix lambda = propagator(j, dt);
        const RealMatrix logm_th = mat_log(lambda).real();

        // empirical counterparts along the posterior-mean pipeline
        const MomentPair mm = matching_moments(x, opts.lag_steps);
        Eigen::LLT<RealMatrix> llt(mm.q0);
        if (llt.info() != Eigen::Success) {
            throw SingularityError("diagnosis: empirical q0 not positive definite", 0.0);
        }
        const RealMatrix prec_hat = llt.solve(RealMatrix::Identity(m, m));
        const RealMatrix lambda_hat = llt.solve(mm.qtau).transpose();
        const ComplexMatrix logm_hat = mat_log(lambda_hat);
        const ComplexMatrix j_hat = logm_hat / dt;

        rec.corr_precision = pearson(flatten(prec_hat), flatten(prec));
        rec.corr_lagged = pearson(flatten(mm.qtau), flatten(qt));
        rec.corr_lambda = pearson(flatten(lambda_hat), flatten(lambda));
        rec.corr_logm = pearson(flatten(logm_hat.real()), flatten(logm_th));
        RealMatrix c_hat = j_hat.real();
        c_hat.diagonal().setZero();
        rec.corr_c = pearson(offdiagonal(c_hat), offdiagonal(draw.params.connectivity));
        rec.imag_ratio = imag_real_ratio(j_hat);
    } catch (const Error&) {
        // NaN sentinels stand
    }
    return rec;
}

/// Diagnosis sweep over network sizes.
inline std::vector<DiagnosisRecord> diagnose_bayes(const std::vector<int>& m_values,
                                                   int n_fixed, int repeats,
                                                   std::uint64_t base_seed,
                                                   const SweepOptions& opts = {}) {
    for (int m : m_values) {
        if (m < 2) throw ConfigError("diagnose_bayes: all m must be >= 2");
    }
    if (repeats < 1) throw ConfigError("diagnose_bayes: repeats must be >= 1");
    const std::size_t trials = m_values.size() * static_cast<std::size_t>(repeats);
    std::vector<DiagnosisRecord> records(trials);
    detail::parallel_for(trials, opts.workers, [&](std::size_t t) {
        const std::size_t cell = t / repeats;
        records[t] = run_diagnosis_trial(m_values[cell], n_fixed, base_seed + t, opts);
    });
    return records;
}

/// Synthetic-cohort protocol for subject identification.
struct CohortConfig {
    int subjects = 30;
    int sessions = 10;
    int m = 50;
    int n = 300;
    double density = 0.2;
    enum class FeatureMask { true_adjacency, full };
    FeatureMask feature_mask = FeatureMask::true_adjacency;
    double train_fraction = 0.8;
    int repetitions = 100;
    std::uint64_t seed = 0;

    void validate() const {
        if (subjects < 2) throw ConfigError("CohortConfig: subjects must be >= 2");
        if (sessions < 2) throw ConfigError("CohortConfig: sessions must be >= 2");
        if (m < 2) throw ConfigError("CohortConfig: m must be >= 2");
        if (n < 3) throw ConfigError("CohortConfig: n must be >= 3");
        if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
            throw ConfigError("CohortConfig: train_fraction must be in (0, 1)");
        }
        if (repetitions < 1) throw ConfigError("CohortConfig: repetitions must be >= 1");
    }
};

/// Feature rows (one per subject-session), subject labels, and the feature
/// mask used to select connectivity entries.
struct Cohort {
    RealMatrix features;      // (subjects * sessions) x F
    std::vector<int> labels;  // subject index per row
    RealMatrix mask;          // binary, zero diagonal
};

/// Generates a cohort: one ground-truth system per subject, independent
/// sessions per subject, per-session connectivity estimation with the given
/// method.  Features are the c_hat entries selected by the mask (the union of
/// all subjects' adjacencies, or every off-diagonal entry).  The union mask is
/// also applied during the iterative fit, mirroring how a structural template
/// constrains that estimator; the log-based estimators are masked after the
/// fact.  Seed layout: subject s draws from seed + s, session k of subject s
/// from seed + subjects + s * sessions + k.
inline Cohort gen_cohort(const CohortConfig& cfg, Method method,
                         const SweepOptions& opts = {}) {
    cfg.validate();
    std::vector<ModelParams> subjects;
    subjects.reserve(cfg.subjects);
    for (int s = 0; s < cfg.subjects; ++s) {
        Rng rng(cfg.seed + static_cast<std::uint64_t>(s));
        subjects.push_back(
            draw_stable_params(NetworkConfig{cfg.m, cfg.density, 0.0, 1.0, cfg.seed},
                               opts.tau_x, rng)
                .params);
    }

    RealMatrix mask = RealMatrix::Zero(cfg.m, cfg.m);
    if (cfg.feature_mask == CohortConfig::FeatureMask::true_adjacency) {
        for (const ModelParams& p : subjects) {
            mask = (mask.array() != 0.0 || p.connectivity.array() != 0.0).cast<double>();
        }
    } else {
        mask.setOnes();
    }
    mask.diagonal().setZero();

    std::vector<std::pair<int, int>> feature_index;
    for (int i = 0; i < cfg.m; ++i) {
        for (int j = 0; j < cfg.m; ++j) {
            if (i != j && mask(i, j) != 0.0) feature_index.emplace_back(i, j);
        }
    }
    if (feature_index.empty()) {
        throw DegenerateInputError("gen_cohort: empty feature mask");
    }

    const std::size_t rows = static_cast<std::size_t>(cfg.subjects) * cfg.sessions;
    Cohort cohort;
    cohort.features.resize(rows, static_cast<Eigen::Index>(feature_index.size()));
    cohort.labels.resize(rows);
    cohort.mask = mask;

    std::exception_ptr failure;
    std::mutex failure_mutex;
    detail::parallel_for(rows, opts.workers, [&](std::size_t row) {
        const int s = static_cast<int>(row) / cfg.sessions;
        const int k = static_cast<int>(row) % cfg.sessions;
        try {
            Rng rng(cfg.seed + static_cast<std::uint64_t>(cfg.subjects) +
                    static_cast<std::uint64_t>(s) * cfg.sessions + k);
            TimeSeries x = simulate(subjects[s], cfg.n * opts.sample_interval,
                                    opts.euler_dt, opts.sample_interval, rng);
            Estimate est;
            if (method == Method::lyapunov) {
                LyapunovFitConfig fit_cfg = opts.fit;
                fit_cfg.tau_x_init = opts.tau_x;
                if (cfg.feature_mask == CohortConfig::FeatureMask::true_adjacency) {
                    fit_cfg.mask = mask;
                }
                est = lyapunov_fit(empirical_moments(x, opts.lag_steps), fit_cfg);
            } else if (method == Method::bayesian) {
                est = bayesian_estimate(x);
            } else {
                est = moments_estimate(empirical_moments(x, opts.lag_steps));
            }
            for (std::size_t f = 0; f < feature_index.size(); ++f) {
                cohort.features(static_cast<Eigen::Index>(row),
                                static_cast<Eigen::Index>(f)) =
                    est.c_hat(feature_index[f].first, feature_index[f].second);
            }
            cohort.labels[row] = s;
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    });
    if (failure) std::rethrow_exception(failure);  // cohorts must be complete
    if (!cohort.features.allFinite()) {
        throw DomainError("gen_cohort: non-finite features");
    }
    return cohort;
}

/// Multinomial logistic regression trained by full-batch gradient descent.
/// Features are standardized internally with the training statistics; the
/// fitted standardization is part of the model.
struct LogRegModel {
    RealMatrix weights;  // classes x (features + 1), bias last
    RealVector mean;
    RealVector scale;

    int predict(const Eigen::Ref<const RealVector>& features) const {
        RealVector z = (features - mean).cwiseQuotient(scale);
        RealVector scores = weights.leftCols(weights.cols() - 1) * z + weights.rightCols(1);
        Eigen::Index best;
        scores.maxCoeff(&best);
        return static_cast<int>(best);
    }
};

inline LogRegModel train_logreg(const RealMatrix& features, const std::vector<int>& labels,
                                double l2_penalty = 1e-3, int max_epochs = 2000,
                                double lr = 0.1) {
    const Eigen::Index rows = features.rows();
    const Eigen::Index f = features.cols();
    if (static_cast<std::size_t>(rows) != labels.size()) {
        throw ShapeError("train_logreg: label count mismatch");
    }
    int classes = 0;
    for (int y : labels) {
        if (y < 0) throw DomainError("train_logreg: labels must be nonnegative");
        classes = std::max(classes, y + 1);
    }
    if (classes < 2) throw DomainError("train_logreg: need at least 2 classes");

    LogRegModel model;
    model.mean = features.colwise().mean();
    RealVector var = (features.rowwise() - model.mean.transpose())
                         .array()
                         .square()
                         .colwise()
                         .mean();
    model.scale = var.cwiseSqrt().cwiseMax(1e-12);
    for (Eigen::Index i = 0; i < f; ++i) {
        if (var[i] == 0.0) model.scale[i] = 1.0;  // constant feature
    }

    RealMatrix z(rows, f + 1);
    z.leftCols(f) = (features.rowwise() - model.mean.transpose()).array().rowwise() /
                    model.scale.transpose().array();
    z.col(f).setOnes();

    RealMatrix onehot = RealMatrix::Zero(rows, classes);
    for (Eigen::Index r = 0; r < rows; ++r) onehot(r, labels[r]) = 1.0;

    RealMatrix w = RealMatrix::Zero(classes, f + 1);
    double prev_loss = std::numeric_limits<double>::infinity();
    for (int epoch = 0; epoch < max_epochs; ++epoch) {
        RealMatrix logits = z * w.transpose();  // rows x classes
        RealVector row_max = logits.rowwise().maxCoeff();
        RealMatrix shifted = (logits.colwise() - row_max).array().exp();
        RealVector norms = shifted.rowwise().sum();
        RealMatrix probs = shifted.array().colwise() / norms.array();

        const double data_loss =
            -((probs.array() * onehot.array()).rowwise().sum().log().sum()) /
            static_cast<double>(rows);
        const double reg_loss = 0.5 * l2_penalty * w.leftCols(f).squaredNorm();
        const double loss = data_loss + reg_loss;
        if (!std::isfinite(loss)) {
            throw DivergenceError("train_logreg: loss diverged; reduce the learning rate");
        }
        if (std::abs(prev_loss - loss) < 1e-8) break;
        prev_loss = loss;

        RealMatrix grad = (probs - onehot).transpose() * z / static_cast<double>(rows);
        grad.leftCols(f) += l2_penalty * w.leftCols(f);
        w -= lr * grad;
    }
    model.weights = std::move(w);
    return model;
}

/// Stratified split -> train -> test accuracy, repeated; one accuracy
/// distribution per estimation method.  A single cohort is generated per
/// method; splits are stratified by subject so that every class appears in
/// training.  With shuffle_labels the labels are permuted before each
/// repetition (permutation null).
inline std::vector<std::vector<double>> classify_experiment(
    const CohortConfig& cfg, const std::vector<Method>& methods,
    const SweepOptions& opts = {}, bool shuffle_labels = false) {
    cfg.validate();
    std::vector<std::vector<double>> result;
    result.reserve(methods.size());
    for (Method method : methods) {
        Cohort cohort = gen_cohort(cfg, method, opts);
        std::vector<double> accuracies(cfg.repetitions);
        for (int rep = 0; rep < cfg.repetitions; ++rep) {
            Rng rng(cfg.seed + static_cast<std::uint64_t>(cfg.subjects) +
                    static_cast<std::uint64_t>(cfg.subjects) * cfg.sessions + rep);
            std::vector<int> labels = cohort.labels;
            if (shuffle_labels) shuffle(labels, rng);

            // stratified indices per class
            std::vector<std::vector<std::size_t>> per_class;
            for (std::size_t r = 0; r < labels.size(); ++r) {
                const std::size_t y = static_cast<std::size_t>(labels[r]);
                if (per_class.size() <= y) per_class.resize(y + 1);
                per_class[y].push_back(r);
            }
            std::vector<std::size_t> train_rows, test_rows;
            for (auto& rows : per_class) {
                shuffle(rows, rng);
                const auto n_train = std::max<std::size_t>(
                    1, std::min(rows.size() - 1,
                                static_cast<std::size_t>(
                                    std::lround(cfg.train_fraction * rows.size()))));
                train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + n_train);
                test_rows.insert(test_rows.end(), rows.begin() + n_train, rows.end());
            }

            RealMatrix train_x(train_rows.size(), cohort.features.cols());
            std::vector<int> train_y(train_rows.size());
            for (std::size_t i = 0; i < train_rows.size(); ++i) {
                train_x.row(i) = cohort.features.row(train_rows[i]);
                train_y[i] = labels[train_rows[i]];
            }
            LogRegModel model = train_logreg(train_x, train_y);

            int correct = 0;
            for (std::size_t r : test_rows) {
                if (model.predict(cohort.features.row(r).transpose()) == labels[r]) {
                    ++correct;
                }
            }
            accuracies[rep] =
                static_cast<double>(correct) / static_cast<double>(test_rows.size());
        }
        result.push_back(std::move(accuracies));
    }
    return result;
}

}  // namespace mou
