#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mou/synth.hpp"
#include "oracles.hpp"

using mou::NetworkConfig;
using mou::RealMatrix;
using mou::RealVector;

TEST_CASE("gen_connectivity normalization and diagonal") {
    mou::Rng rng(1);
    for (int t = 0; t < 50; ++t) {
        RealMatrix c = mou::gen_connectivity(NetworkConfig{8, 0.3}, rng);
        REQUIRE(c.diagonal().cwiseAbs().maxCoeff() == 0.0);
        REQUIRE(std::abs(c.sum() - 8.0) < 1e-12);
        REQUIRE(c.minCoeff() >= 0.0);
    }
}

TEST_CASE("gen_connectivity with density one fills the off-diagonal") {
    mou::Rng rng(2);
    RealMatrix c = mou::gen_connectivity(NetworkConfig{2, 1.0}, rng);
    REQUIRE(c(0, 1) > 0.0);
    REQUIRE(c(1, 0) > 0.0);
}

TEST_CASE("gen_connectivity Monte-Carlo edge density") {
    mou::Rng rng(3);
    const int m = 50;
    const int draws = 1000;
    long edges = 0;
    for (int t = 0; t < draws; ++t) {
        RealMatrix c = mou::gen_connectivity(NetworkConfig{m, 0.2}, rng);
        edges += (c.array() != 0.0).count();
    }
    const double density = static_cast<double>(edges) /
                           (static_cast<double>(draws) * m * (m - 1));
    REQUIRE(density == Catch::Approx(0.2).margin(0.02));
}

TEST_CASE("gen_sigma law") {
    mou::Rng rng(4);
    RealVector s = mou::gen_sigma(100000, rng);
    REQUIRE(s.minCoeff() > 0.5);
    REQUIRE(s.maxCoeff() < 1.0);
    REQUIRE(s.mean() == Catch::Approx(0.75).margin(0.005));

    mou::Rng a(99), b(99);
    REQUIRE(mou::gen_sigma(16, a) == mou::gen_sigma(16, b));
}

TEST_CASE("simulate rejects bad step configuration") {
    mou::Rng rng(5);
    mou::ModelParams p(RealMatrix::Zero(2, 2), RealVector::Ones(2), 1.0);
    REQUIRE_THROWS_AS(mou::simulate(p, 100.0, 0.05, 0.9999, rng), mou::ConfigError);
    REQUIRE_THROWS_AS(mou::simulate(p, 1.0, 0.05, 1.0, rng), mou::ConfigError);
    REQUIRE_THROWS_AS(mou::simulate(p, 100.0, 0.0, 1.0, rng), mou::ConfigError);
}

TEST_CASE("simulate near-zero noise keeps a zero state") {
    mou::Rng rng(6);
    mou::ModelParams p(RealMatrix::Zero(3, 3), RealVector::Constant(3, 1e-12), 1.0);
    mou::TimeSeries x = mou::simulate(p, 100.0, 0.05, 1.0, rng);
    REQUIRE(x.data.cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("simulate scalar stationary variance") {
    mou::Rng rng(7);
    mou::ModelParams p(RealMatrix::Zero(1, 1), RealVector::Ones(1), 1.0);
    mou::TimeSeries x = mou::simulate(p, 50000.0, 0.05, 1.0, rng);
    const double mean = x.data.row(0).mean();
    const double var = (x.data.row(0).array() - mean).square().sum() /
                       static_cast<double>(x.sample_count() - 1);
    REQUIRE(var == Catch::Approx(0.5).margin(0.02));
}

TEST_CASE("simulate reproduces the theoretical covariance") {
    mou::Rng rng(8);
    mou::StableDraw draw = mou::draw_stable_params(NetworkConfig{10, 0.2}, 1.0, rng);
    mou::TimeSeries x = mou::simulate(draw.params, 50000.0, 0.05, 1.0, rng);
    mou::MomentPair em = mou::empirical_moments(x, 1);
    const RealMatrix want = mou::model_cov(draw.params);
    REQUIRE(mou::pearson(mou::flatten(em.q0), mou::flatten(want)) > 0.99);
}

TEST_CASE("simulate determinism") {
    mou::Rng ra(42), rb(42);
    mou::ModelParams p(RealMatrix::Zero(4, 4), RealVector::Ones(4), 1.0);
    mou::TimeSeries xa = mou::simulate(p, 100.0, 0.05, 1.0, ra);
    mou::TimeSeries xb = mou::simulate(p, 100.0, 0.05, 1.0, rb);
    REQUIRE(xa.data == xb.data);
}

TEST_CASE("simulate convergence under step halving") {
    mou::Rng rng(9);
    mou::StableDraw draw = mou::draw_stable_params(NetworkConfig{10, 0.2}, 1.0, rng);
    const RealMatrix want = mou::model_cov(draw.params);

    mou::Rng r1(1234), r2(1234);
    mou::TimeSeries coarse = mou::simulate(draw.params, 5000.0, 0.05, 1.0, r1);
    mou::TimeSeries fine = mou::simulate(draw.params, 5000.0, 0.025, 1.0, r2);
    const double pc = mou::pearson(mou::flatten(mou::empirical_moments(coarse, 1).q0),
                                   mou::flatten(want));
    const double pf = mou::pearson(mou::flatten(mou::empirical_moments(fine, 1).q0),
                                   mou::flatten(want));
    REQUIRE(std::abs(pc - pf) < 0.01);
}

TEST_CASE("empirical_moments basics") {
    SECTION("lag 0 returns identical matrices") {
        RealMatrix d(2, 4);
        d << 1, 2, 3, 4, 0, 1, 0, 1;
        mou::MomentPair mp = mou::empirical_moments(mou::TimeSeries(d, 1.0), 0);
        REQUIRE(mp.q0 == mp.qtau);
        REQUIRE(mp.tau == 0.0);
    }
    SECTION("two-sample hand case") {
        RealMatrix d(2, 2);
        d << 1, -1, 0, 0;
        mou::MomentPair mp = mou::empirical_moments(mou::TimeSeries(d, 1.0), 0);
        REQUIRE(mp.q0(0, 0) == Catch::Approx(2.0).epsilon(1e-14));
        REQUIRE(mp.q0(0, 1) == 0.0);
        REQUIRE(mp.q0(1, 1) == 0.0);
    }
    SECTION("insufficient samples") {
        RealMatrix d(2, 3);
        d.setRandom();
        REQUIRE_THROWS_AS(mou::empirical_moments(mou::TimeSeries(d, 1.0), 2),
                          mou::LengthError);
    }
    SECTION("q0 exactly symmetric and PSD") {
        mou::Rng rng(11);
        RealMatrix d(5, 40);
        for (int i = 0; i < d.size(); ++i) d.data()[i] = rng.normal();
        mou::MomentPair mp = mou::empirical_moments(mou::TimeSeries(d, 1.0), 1);
        REQUIRE((mp.q0 - mp.q0.transpose()).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE(mou::min_symmetric_eigenvalue(mp.q0) > -1e-10);
    }
}

TEST_CASE("empirical moments of a long simulation match theory") {
    mou::Rng rng(12);
    mou::StableDraw draw = mou::draw_stable_params(NetworkConfig{6, 0.25}, 1.0, rng);
    mou::TimeSeries x = mou::simulate(draw.params, 50000.0, 0.05, 1.0, rng);
    mou::MomentPair em = mou::empirical_moments(x, 1);
    const RealMatrix q0 = mou::model_cov(draw.params);
    const RealMatrix qt = mou::model_lagged_cov(q0, jacobian(draw.params), 1.0);
    REQUIRE(mou::pearson(mou::flatten(em.q0), mou::flatten(q0)) > 0.99);
    REQUIRE(mou::pearson(mou::flatten(em.qtau), mou::flatten(qt)) > 0.99);
}

TEST_CASE("matching_moments shares the demeaning and ranges") {
    mou::Rng rng(13);
    RealMatrix d(3, 30);
    for (int i = 0; i < d.size(); ++i) d.data()[i] = rng.normal();
    mou::TimeSeries x(d, 1.0);
    mou::MomentPair mm = mou::matching_moments(x, 1);
    // q0 and qtau use the same normalizer and sample range
    const Eigen::Index n = x.sample_count();
    RealMatrix centered = x.data.colwise() - RealVector(x.data.rowwise().mean());
    RealMatrix q0_want = centered.leftCols(n - 1) * centered.leftCols(n - 1).transpose() /
                         static_cast<double>(n - 2);
    REQUIRE((mm.q0 - q0_want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("draw_stable_params yields stable systems and counts rejections") {
    mou::Rng rng(14);
    int total_rejected = 0;
    for (int t = 0; t < 20; ++t) {
        mou::StableDraw d = mou::draw_stable_params(NetworkConfig{30, 0.2}, 1.0, rng);
        REQUIRE(mou::spectral_abscissa(jacobian(d.params)) < -1e-12);
        total_rejected += d.rejected;
    }
    // the generative law is marginal by construction; rejections are expected
    REQUIRE(total_rejected >= 0);
}
