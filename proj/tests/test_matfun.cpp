#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "mou/matfun.hpp"
#include "mou/rng.hpp"
#include "oracles.hpp"

using mou::ComplexMatrix;
using mou::RealMatrix;
using mou::RealVector;

namespace {
template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
    return m.cwiseAbs().maxCoeff();
}
}  // namespace

TEST_CASE("mat_exp on fixed small cases") {
    SECTION("zero matrix") {
        RealMatrix z = RealMatrix::Zero(2, 2);
        REQUIRE(max_abs(mou::mat_exp(z) - RealMatrix::Identity(2, 2)) < 1e-15);
    }
    SECTION("diagonal") {
        RealMatrix d = RealMatrix::Zero(2, 2);
        d(0, 0) = 1.0;
        d(1, 1) = -1.0;
        RealMatrix e = mou::mat_exp(d);
        REQUIRE(e(0, 0) == Catch::Approx(std::exp(1.0)).epsilon(1e-13));
        REQUIRE(e(1, 1) == Catch::Approx(std::exp(-1.0)).epsilon(1e-13));
        REQUIRE(std::abs(e(0, 1)) < 1e-15);
        REQUIRE(std::abs(e(1, 0)) < 1e-15);
    }
    SECTION("nilpotent series truncates") {
        RealMatrix n = RealMatrix::Zero(2, 2);
        n(0, 1) = 1.0;
        RealMatrix e = mou::mat_exp(n);
        RealMatrix want(2, 2);
        want << 1.0, 1.0, 0.0, 1.0;
        REQUIRE(max_abs(e - want) < 1e-14);
    }
}

TEST_CASE("mat_exp matches the Taylor-series oracle") {
    mou::Rng rng(101);
    for (int trial = 0; trial < 20; ++trial) {
        RealMatrix a = oracle::random_matrix(5, rng, 0.8);
        a /= std::max(1.0, mou::spectral_radius(a) / 0.9);  // spectral radius < 1
        RealMatrix got = mou::mat_exp(a);
        RealMatrix want = oracle::taylor_expm(a, 60);
        REQUIRE(max_abs(got - want) < 1e-10);
    }
}

TEST_CASE("mat_exp rejects bad input") {
    REQUIRE_THROWS_AS(mou::mat_exp(RealMatrix::Zero(2, 3)), mou::ShapeError);
    RealMatrix bad = RealMatrix::Zero(2, 2);
    bad(0, 0) = std::nan("");
    REQUIRE_THROWS_AS(mou::mat_exp(bad), mou::DomainError);
}

TEST_CASE("mat_exp inverse identity") {
    // expm(A) expm(-A) = I for a spread of norms up to ||A||_F = 5.
    mou::Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        RealMatrix a = oracle::random_matrix(6, rng, 1.0);
        a *= (0.2 + 4.8 * rng.uniform01()) / a.norm();
        a *= 5.0 / 5.0;
        RealMatrix prod = mou::mat_exp(a) * mou::mat_exp(RealMatrix(-a));
        REQUIRE(max_abs(prod - RealMatrix::Identity(6, 6)) < 1e-9);
    }
}

TEST_CASE("mat_log on fixed small cases") {
    SECTION("identity") {
        ComplexMatrix l = mou::mat_log(RealMatrix::Identity(3, 3));
        REQUIRE(max_abs(l) < 1e-14);
    }
    SECTION("principal log of -1 has imaginary part pi") {
        RealMatrix d = RealMatrix::Zero(2, 2);
        d(0, 0) = -1.0;
        d(1, 1) = 1.0;
        ComplexMatrix l = mou::mat_log(d);
        REQUIRE(l(0, 0).real() == Catch::Approx(0.0).margin(1e-12));
        REQUIRE(l(0, 0).imag() == Catch::Approx(M_PI).epsilon(1e-12));
        REQUIRE(std::abs(l(1, 1)) < 1e-12);
        REQUIRE(std::abs(l(0, 1)) < 1e-12);
        REQUIRE(std::abs(l(1, 0)) < 1e-12);
    }
    SECTION("roundtrip through mat_exp on a fixed matrix") {
        RealMatrix a(2, 2);
        a << -1.0, 0.3, 0.1, -0.8;
        ComplexMatrix l = mou::mat_log(mou::mat_exp(a));
        REQUIRE(max_abs(RealMatrix(l.real() - a)) < 1e-9);
        REQUIRE(max_abs(RealMatrix(l.imag())) < 1e-9);
    }
}

TEST_CASE("mat_log rejects singular input") {
    RealMatrix s = RealMatrix::Zero(2, 2);
    s(0, 1) = 1.0;  // nilpotent, eigenvalues 0
    try {
        mou::mat_log(s);
        FAIL("expected SingularityError");
    } catch (const mou::SingularityError& e) {
        REQUIRE(e.offending_magnitude() <= 1e-12);
    }
}

TEST_CASE("mat_log(mat_exp(A)) = A when eigenvalues stay in the principal strip") {
    mou::Rng rng(303);
    int done = 0;
    while (done < 25) {
        RealMatrix a = oracle::random_matrix(5, rng, 0.6);
        Eigen::EigenSolver<RealMatrix> es(a, false);
        if (es.eigenvalues().imag().cwiseAbs().maxCoeff() > 3.0) continue;  // stay in (-pi, pi)
        ++done;
        ComplexMatrix l = mou::mat_log(mou::mat_exp(a));
        REQUIRE(max_abs(RealMatrix(l.real() - a)) < 1e-8);
        REQUIRE(max_abs(RealMatrix(l.imag())) < 1e-8);
    }
}

TEST_CASE("solve_lyapunov on fixed small cases") {
    SECTION("scalar") {
        RealMatrix j(1, 1), s(1, 1);
        j << -1.0;
        s << 1.0;
        REQUIRE(mou::solve_lyapunov(j, s)(0, 0) == Catch::Approx(0.5).epsilon(1e-13));
    }
    SECTION("decoupled diagonal") {
        RealMatrix j = RealMatrix::Zero(2, 2), s = RealMatrix::Zero(2, 2);
        j.diagonal() << -1.0, -2.0;
        s.diagonal() << 2.0, 4.0;
        RealMatrix q = mou::solve_lyapunov(j, s);
        REQUIRE(max_abs(q - RealMatrix::Identity(2, 2)) < 1e-13);
    }
}

TEST_CASE("solve_lyapunov matches the Kronecker oracle") {
    mou::Rng rng(404);
    for (int trial = 0; trial < 12; ++trial) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(7));  // 2..8
        RealMatrix j = oracle::random_stable(n, rng);
        RealMatrix s = oracle::random_psd(n, rng);
        RealMatrix got = mou::solve_lyapunov(j, s);
        RealMatrix want = oracle::kron_lyapunov(j, s);
        REQUIRE(max_abs(got - want) < 1e-9);
        // residual contract
        const double resid = (j * got + got * j.transpose() + s).norm() / s.norm();
        REQUIRE(resid < 1e-10);
        // exact symmetry and PSD within tolerance
        REQUIRE((got - got.transpose()).cwiseAbs().maxCoeff() == 0.0);
        REQUIRE(mou::min_symmetric_eigenvalue(got) > -1e-10);
    }
}

TEST_CASE("solve_lyapunov rejects unstable or mismatched input") {
    RealMatrix j = RealMatrix::Identity(2, 2);  // eigenvalues +1
    RealMatrix s = RealMatrix::Identity(2, 2);
    REQUIRE_THROWS_AS(mou::solve_lyapunov(j, s), mou::StabilityError);
    REQUIRE_THROWS_AS(mou::solve_lyapunov(RealMatrix::Zero(2, 2), RealMatrix::Zero(3, 3)),
                      mou::ShapeError);
    // marginally stable (eigenvalue at 0) must also be rejected
    RealMatrix jm = RealMatrix::Zero(2, 2);
    jm(0, 0) = -1.0;
    REQUIRE_THROWS_AS(mou::solve_lyapunov(jm, s), mou::StabilityError);
}

TEST_CASE("pearson basics and direct-formula oracle") {
    RealVector a(3), b(3);
    a << 1, 2, 3;
    REQUIRE(mou::pearson(a, a) == Catch::Approx(1.0).epsilon(1e-14));
    b << 3, 2, 1;
    REQUIRE(mou::pearson(a, b) == Catch::Approx(-1.0).epsilon(1e-14));

    RealVector c(4), d(4);
    c << 1, 2, 3, 4;
    d << 1, 2, 3, 5;
    REQUIRE(mou::pearson(c, d) ==
            Catch::Approx(oracle::direct_pearson(c, d)).epsilon(1e-14));
    // frozen value from the two-pass oracle: 6.5 / sqrt(5 * 8.75)
    REQUIRE(mou::pearson(c, d) == Catch::Approx(0.9827076298239908).epsilon(1e-12));
}

TEST_CASE("pearson affine invariance") {
    mou::Rng rng(55);
    RealVector a(20), b(20);
    for (int i = 0; i < 20; ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
    }
    const double base = mou::pearson(a, b);
    for (int trial = 0; trial < 10; ++trial) {
        const double alpha = 0.1 + 5.0 * rng.uniform01();
        const double beta = 10.0 * (rng.uniform01() - 0.5);
        RealVector a2 = alpha * a.array() + beta;
        REQUIRE(std::abs(mou::pearson(a2, b) - base) < 1e-12);
    }
}

TEST_CASE("pearson degenerate input") {
    RealVector a = RealVector::Ones(4);
    RealVector b = RealVector::Ones(4);
    REQUIRE_THROWS_AS(mou::pearson(a, b), mou::DegenerateInputError);
    RealVector c(4);
    c << 1, 2, 3, 4;
    REQUIRE_THROWS_AS(mou::pearson(a, c), mou::DegenerateInputError);
    REQUIRE_THROWS_AS(mou::pearson(c, RealVector::Ones(3)), mou::ShapeError);
}

TEST_CASE("imag_real_ratio") {
    ComplexMatrix re_only = RealMatrix::Random(3, 3).cast<mou::Complex>();
    REQUIRE(mou::imag_real_ratio(re_only) == 0.0);

    RealMatrix r = RealMatrix::Random(3, 3);
    ComplexMatrix both = r.cast<mou::Complex>() + mou::Complex(0, 1) * r.cast<mou::Complex>();
    REQUIRE(mou::imag_real_ratio(both) == Catch::Approx(1.0).epsilon(1e-14));

    ComplexMatrix mixed(2, 2);
    mixed.setZero();
    mixed(0, 0) = {1.0, 0.0};
    mixed(1, 1) = {1.0, 0.0};
    mixed(0, 1) = {0.0, 1.0};
    REQUIRE(mou::imag_real_ratio(mixed) == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));

    ComplexMatrix imag_only = mou::Complex(0, 1) * RealMatrix::Random(2, 2).cast<mou::Complex>();
    REQUIRE_THROWS_AS(mou::imag_real_ratio(imag_only), mou::DegenerateInputError);
}
