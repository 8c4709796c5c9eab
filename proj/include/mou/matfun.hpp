#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "mou/errors.hpp"

namespace mou {

using RealMatrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using Complex = std::complex<double>;

namespace detail {

inline void require_square(const RealMatrix& a, const char* who) {
    if (a.rows() != a.cols()) {
        throw ShapeError(std::string(who) + ": matrix must be square, got " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
}

inline void require_finite(const RealMatrix& a, const char* who) {
    if (!a.allFinite()) {
        throw DomainError(std::string(who) + ": matrix has non-finite entries");
    }
}

inline void require_same_shape(const RealMatrix& a, const RealMatrix& b, const char* who) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(who) + ": shape mismatch " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

inline double one_norm(const RealMatrix& a) {
    return a.cwiseAbs().colwise().sum().maxCoeff();
}

inline double one_norm(const ComplexMatrix& a) {
    return a.cwiseAbs().colwise().sum().maxCoeff();
}

}  // namespace detail

/// Largest real part over the eigenvalues of a (its spectral abscissa).
inline double spectral_abscissa(const RealMatrix& a) {
    detail::require_square(a, "spectral_abscissa");
    Eigen::EigenSolver<RealMatrix> es(a, /*computeEigenvectors=*/false);
    return es.eigenvalues().real().maxCoeff();
}

/// Largest eigenvalue magnitude of a.
inline double spectral_radius(const RealMatrix& a) {
    detail::require_square(a, "spectral_radius");
    Eigen::EigenSolver<RealMatrix> es(a, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Smallest eigenvalue of a symmetric matrix.
inline double min_symmetric_eigenvalue(const RealMatrix& a) {
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// All entries flattened (column-major) as a vector.
inline RealVector flatten(const RealMatrix& a) {
    return Eigen::Map<const RealVector>(a.data(), a.size());
}

/// Off-diagonal entries flattened in row-major reading order.
inline RealVector offdiagonal(const RealMatrix& a) {
    detail::require_square(a, "offdiagonal");
    const Eigen::Index n = a.rows();
    RealVector out(n * n - n);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i != j) out[k++] = a(i, j);
        }
    }
    return out;
}

/// Matrix exponential by scaling-and-squaring with diagonal Pade approximants
/// (degrees 3/5/7/9/13 chosen from the 1-norm, as in Higham's expm).
inline RealMatrix mat_exp(const RealMatrix& a) {
    detail::require_square(a, "mat_exp");
    detail::require_finite(a, "mat_exp");
    const Eigen::Index n = a.rows();
    const RealMatrix ident = RealMatrix::Identity(n, n);

    // theta_m: largest 1-norm for which the degree-m approximant is accurate
    // in double precision.
    constexpr double theta3 = 1.495585217958292e-2;
    constexpr double theta5 = 2.539398330063230e-1;
    constexpr double theta7 = 9.504178996162932e-1;
    constexpr double theta9 = 2.097847961257068e0;
    constexpr double theta13 = 5.371920351148152e0;

    const double eta = detail::one_norm(a);

    RealMatrix u, v;
    int squarings = 0;

    // Horner evaluation in x^2 of the odd (u) and even (v) coefficient sets.
    auto pade_low = [&](const RealMatrix& x, const std::vector<double>& b) {
        const RealMatrix x2 = x * x;
        const std::size_t m = b.size() - 1;
        RealMatrix uo = b[m] * ident;
        for (std::size_t k = m - 2; ; k -= 2) {
            uo = uo * x2;
            uo += b[k] * ident;
            if (k == 1) break;
        }
        RealMatrix ve = b[m - 1] * ident;
        for (std::size_t k = m - 3; ; k -= 2) {
            ve = ve * x2;
            ve += b[k] * ident;
            if (k == 0) break;
        }
        u = x * uo;
        v = ve;
    };

    if (eta <= theta3) {
        pade_low(a, {120.0, 60.0, 12.0, 1.0});
    } else if (eta <= theta5) {
        pade_low(a, {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0});
    } else if (eta <= theta7) {
        pade_low(a, {17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0});
    } else if (eta <= theta9) {
        pade_low(a, {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                     2162160.0, 110880.0, 3960.0, 90.0, 1.0});
    } else {
        squarings = std::max(0, static_cast<int>(std::ceil(std::log2(eta / theta13))));
        const RealMatrix x = a / std::ldexp(1.0, squarings);
        static const double b[] = {64764752532480000.0, 32382376266240000.0,
                                   7771770303897600.0, 1187353796428800.0,
                                   129060195264000.0, 10559470521600.0,
                                   670442572800.0, 33522128640.0, 1323241920.0,
                                   40840800.0, 960960.0, 16380.0, 182.0, 1.0};
        const RealMatrix x2 = x * x;
        const RealMatrix x4 = x2 * x2;
        const RealMatrix x6 = x2 * x4;
        u = x * (x6 * (b[13] * x6 + b[11] * x4 + b[9] * x2) +
                 b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * ident);
        v = x6 * (b[12] * x6 + b[10] * x4 + b[8] * x2) +
            b[6] * x6 + b[4] * x4 + b[2] * x2 + b[0] * ident;
    }

    RealMatrix r = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < squarings; ++k) {
        r = r * r;
    }
    return r;
}

namespace detail {

/// Principal square root of an upper-triangular complex matrix
/// (Bjorck-Hammarling recurrence).
inline ComplexMatrix sqrtm_triangular(const ComplexMatrix& t) {
    const Eigen::Index n = t.rows();
    ComplexMatrix r = ComplexMatrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Complex d = t(j, j);
        if (d.imag() == 0.0) d = Complex(d.real(), +0.0);  // keep principal branch
        r(j, j) = std::sqrt(d);
        for (Eigen::Index i = j - 1; i >= 0; --i) {
            Complex s = 0.0;
            for (Eigen::Index k = i + 1; k < j; ++k) {
                s += r(i, k) * r(k, j);
            }
            r(i, j) = (t(i, j) - s) / (r(i, i) + r(j, j));
        }
    }
    return r;
}

}  // namespace detail

/// Principal matrix logarithm of a real square matrix, computed by complex
/// Schur decomposition followed by inverse scaling-and-squaring on the
/// triangular factor (repeated square roots, then a 7-node Gauss-Legendre
/// Pade approximant of log(I + X)).  The result is complex: eigenvalues on
/// the negative real axis contribute imaginary parts of magnitude pi.
inline ComplexMatrix mat_log(const RealMatrix& a) {
    detail::require_square(a, "mat_log");
    detail::require_finite(a, "mat_log");
    const Eigen::Index n = a.rows();

    Eigen::ComplexSchur<ComplexMatrix> schur(a.cast<Complex>());
    if (schur.info() != Eigen::Success) {
        throw Error("mat_log: Schur decomposition failed to converge");
    }
    ComplexMatrix t = schur.matrixT();
    const ComplexMatrix& q = schur.matrixU();

    constexpr double singular_tol = 1e-12;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mag = std::abs(t(i, i));
        if (mag <= singular_tol) {
            throw SingularityError(
                "mat_log: eigenvalue of magnitude " + std::to_string(mag) +
                    " within singularity tolerance",
                mag);
        }
        if (t(i, i).imag() == 0.0) {
            t(i, i) = Complex(t(i, i).real(), +0.0);
        }
    }

    const ComplexMatrix ident = ComplexMatrix::Identity(n, n);
    int sqrt_count = 0;
    constexpr int max_sqrts = 100;
    while (detail::one_norm(ComplexMatrix(t - ident)) > 0.25) {
        if (++sqrt_count > max_sqrts) {
            throw Error("mat_log: inverse scaling did not contract to the identity");
        }
        t = detail::sqrtm_triangular(t);
    }

    // 7-node Gauss-Legendre quadrature of log(I+X) = int_0^1 X (I + s X)^-1 ds,
    // equivalent to the [7/7] Pade approximant; ample accuracy for |X| <= 1/4.
    static const double nodes[] = {0.9491079123427585, 0.7415311855993945,
                                   0.4058451513773972, 0.0};
    static const double weights[] = {0.1294849661688697, 0.2797053914892766,
                                     0.3818300505051189, 0.4179591836734694};
    const ComplexMatrix x = t - ident;
    ComplexMatrix lg = ComplexMatrix::Zero(n, n);
    auto add_node = [&](double node, double weight) {
        const double s = 0.5 * (node + 1.0);
        const double w = 0.5 * weight;
        ComplexMatrix denom = ident + s * x;
        lg += w * denom.triangularView<Eigen::Upper>().solve(x);
    };
    for (int i = 0; i < 3; ++i) {
        add_node(nodes[i], weights[i]);
        add_node(-nodes[i], weights[i]);
    }
    add_node(nodes[3], weights[3]);

    lg *= std::ldexp(1.0, sqrt_count);
    return q * lg * q.adjoint();
}

/// Solves J Q + Q J^T + S = 0 for Q (continuous Lyapunov equation) with the
/// Bartels-Stewart algorithm on the complex Schur form of J.  Requires J
/// Hurwitz-stable and S symmetric; the result is symmetrized before return.
inline RealMatrix solve_lyapunov(const RealMatrix& j, const RealMatrix& s) {
    detail::require_square(j, "solve_lyapunov");
    detail::require_same_shape(j, s, "solve_lyapunov");
    detail::require_finite(j, "solve_lyapunov");
    detail::require_finite(s, "solve_lyapunov");
    const Eigen::Index n = j.rows();
    const double sym_tol = 1e-10 * std::max(1.0, s.cwiseAbs().maxCoeff());
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > sym_tol) {
        throw DomainError("solve_lyapunov: S must be symmetric");
    }

    Eigen::ComplexSchur<ComplexMatrix> schur(j.cast<Complex>());
    if (schur.info() != Eigen::Success) {
        throw Error("solve_lyapunov: Schur decomposition failed to converge");
    }
    const ComplexMatrix& t = schur.matrixT();
    const ComplexMatrix& q = schur.matrixU();

    constexpr double stability_tol = -1e-12;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (t(i, i).real() >= stability_tol) {
            throw StabilityError(
                "solve_lyapunov: J is not Hurwitz-stable (eigenvalue real part " +
                std::to_string(t(i, i).real()) + ")");
        }
    }

    // T Y + Y T^* = C with C = -Q^* S Q; solve column-by-column from the last.
    const ComplexMatrix c = -(q.adjoint() * s.cast<Complex>() * q);
    ComplexMatrix y = ComplexMatrix::Zero(n, n);
    for (Eigen::Index col = n - 1; col >= 0; --col) {
        Eigen::VectorXcd rhs = c.col(col);
        for (Eigen::Index k = col + 1; k < n; ++k) {
            rhs -= std::conj(t(col, k)) * y.col(k);
        }
        ComplexMatrix shifted = t;
        shifted.diagonal().array() += std::conj(t(col, col));
        y.col(col) = shifted.triangularView<Eigen::Upper>().solve(rhs);
    }

    RealMatrix out = (q * y * q.adjoint()).real();
    return 0.5 * (out + out.transpose());
}

/// Sample Pearson correlation between two equal-length vectors.
inline double pearson(const Eigen::Ref<const RealVector>& a,
                      const Eigen::Ref<const RealVector>& b) {
    if (a.size() != b.size()) {
        throw ShapeError("pearson: length mismatch " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
    }
    if (a.size() < 2) {
        throw LengthError("pearson: need at least 2 samples");
    }
    const double ma = a.mean();
    const double mb = b.mean();
    const RealVector da = a.array() - ma;
    const RealVector db = b.array() - mb;
    const double va = da.squaredNorm();
    const double vb = db.squaredNorm();
    if (va == 0.0 && vb == 0.0) {
        throw DegenerateInputError("pearson: both inputs are constant");
    }
    if (va == 0.0 || vb == 0.0) {
        throw DegenerateInputError("pearson: one input is constant");
    }
    return std::clamp(da.dot(db) / std::sqrt(va * vb), -1.0, 1.0);
}

/// Frobenius-norm ratio of the imaginary to the real part of a complex matrix.
inline double imag_real_ratio(const ComplexMatrix& a) {
    const double re = a.real().norm();
    if (re == 0.0) {
        throw DegenerateInputError("imag_real_ratio: real part is zero");
    }
    return a.imag().norm() / re;
}

}  // namespace mou
