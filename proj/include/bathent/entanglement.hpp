#pragma once

// Logarithmic negativity of a two-mode Gaussian state. Covariances use the
// doubled convention (vacuum = identity) and the ordering (Q1, Q2, P1, P2).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "bathent/error.hpp"

namespace bathent {

using Matrix4 = Eigen::Matrix4d;

/// Sigma = [[0, I], [-I, 0]] for the ordering (Q1, Q2, P1, P2).
struct SymplecticForm {
    static Matrix4 matrix() {
        Matrix4 s = Matrix4::Zero();
        s.topRightCorner<2, 2>() = Eigen::Matrix2d::Identity();
        s.bottomLeftCorner<2, 2>() = -Eigen::Matrix2d::Identity();
        return s;
    }
};

/// Time reversal of the second oscillator: flips the sign of row 4 and column 4.
inline Matrix4 partial_transpose(const Matrix4& c) {
    Matrix4 out = c;
    out.row(3) *= -1.0;
    out.col(3) *= -1.0;
    return out;
}

/// Symplectic eigenvalues (ascending) from the spectrum of i Sigma c, whose
/// four eigenvalues come in +/- pairs. Works for non-physical inputs such as
/// partial transposes.
inline std::array<double, 2> symplectic_eigenvalues(const Matrix4& c) {
    const Eigen::Matrix4cd m = std::complex<double>(0.0, 1.0) * (SymplecticForm::matrix() * c).cast<std::complex<double>>();
    Eigen::ComplexEigenSolver<Eigen::Matrix4cd> es(m, false);
    if (es.info() != Eigen::Success)
        throw NumericalError(NumericalFailure::Pairing, "eigen-decomposition of i Sigma c did not converge");
    std::array<double, 4> mod{};
    for (int i = 0; i < 4; ++i) mod[i] = std::abs(es.eigenvalues()[i]);
    std::sort(mod.begin(), mod.end());
    const double scale = std::max(1.0, mod[3]);
    if (std::abs(mod[0] - mod[1]) > 1e-8 * scale || std::abs(mod[2] - mod[3]) > 1e-8 * scale)
        throw NumericalError(NumericalFailure::Pairing,
                             "symplectic spectrum does not pair up (" + std::to_string(mod[0]) + ", " +
                                 std::to_string(mod[1]) + ", " + std::to_string(mod[2]) + ", " +
                                 std::to_string(mod[3]) + ")");
    return {0.5 * (mod[0] + mod[1]), 0.5 * (mod[2] + mod[3])};
}

/// Two-mode closed form nu^2 = (Delta -+ sqrt(Delta^2 - 4 det c)) / 2 with
/// Delta = det A + det B + 2 det C for the mode blocks of c. Cross-check only.
inline std::array<double, 2> symplectic_eigenvalues_closed_form(const Matrix4& c) {
    // Extended precision: for strongly squeezed states det c is O(1) while the
    // entries are O(100), and the determinant cancels most of a double.
    using Matrix4l = Eigen::Matrix<long double, 4, 4>;
    // reorder (Q1, Q2, P1, P2) -> (Q1, P1, Q2, P2)
    const std::array<int, 4> idx{0, 2, 1, 3};
    Matrix4l r;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) r(i, j) = c(idx[i], idx[j]);
    const long double detA = r.topLeftCorner<2, 2>().determinant();
    const long double detB = r.bottomRightCorner<2, 2>().determinant();
    const long double detC = r.topRightCorner<2, 2>().determinant();
    const long double delta = detA + detB + 2.0L * detC;
    const long double det = r.determinant();
    const long double disc = std::sqrt(std::max(0.0L, delta * delta - 4.0L * det));
    const long double hi2 = 0.5L * (delta + disc);
    // lo^2 hi^2 = det c; dividing avoids the cancellation in delta - disc
    const long double lo = hi2 > 0.0L ? std::sqrt(std::max(0.0L, det / hi2)) : 0.0L;
    return {double(lo), double(std::sqrt(std::max(0.0L, hi2)))};
}

/// Smallest symplectic eigenvalue of c itself; >= 1 for physical states.
inline double physicality_margin(const Matrix4& c) { return symplectic_eigenvalues(c)[0]; }

/// E = -sum_j log2 min(1, nu_j) over the symplectic eigenvalues of the
/// partial transpose. Eigenvalues within 1e-12 of 1 count as exactly 1.
inline double log_negativity(const Matrix4& c) {
    const auto own = symplectic_eigenvalues(c);
    if (own[0] < 1.0 - 1e-6)
        throw NumericalError(NumericalFailure::Unphysical,
                             "covariance violates the uncertainty relation (nu_min=" +
                                 std::to_string(own[0]) + ")");
    const auto nu = symplectic_eigenvalues(partial_transpose(c));
    double e = 0.0;
    for (double v : nu) {
        if (v < 1.0 - 1e-12) e -= std::log2(v);
    }
    return e;
}

}  // namespace bathent
