#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "catch_amalgamated.hpp"

#include "bathent/entanglement.hpp"

using namespace bathent;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// symplectic matrices on (q1, q2, p1, p2)
Matrix4 two_mode_squeezer(double s) {
    Matrix4 S = Matrix4::Zero();
    const double c = std::cosh(s), h = std::sinh(s);
    S(0, 0) = c, S(0, 1) = h;
    S(1, 0) = h, S(1, 1) = c;
    S(2, 2) = c, S(2, 3) = -h;
    S(3, 2) = -h, S(3, 3) = c;
    return S;
}

Matrix4 local(double th1, double r1, double th2, double r2) {
    // rotation then squeeze on each mode
    Matrix4 S = Matrix4::Zero();
    const std::array<std::array<double, 2>, 2> modes{{{th1, r1}, {th2, r2}}};
    for (int m = 0; m < 2; ++m) {
        const double th = modes[m][0], r = modes[m][1];
        Eigen::Matrix2d rot, sq;
        rot << std::cos(th), std::sin(th), -std::sin(th), std::cos(th);
        sq << std::exp(-r), 0, 0, std::exp(r);
        const Eigen::Matrix2d b = sq * rot;
        S(m, m) = b(0, 0), S(m, m + 2) = b(0, 1);
        S(m + 2, m) = b(1, 0), S(m + 2, m + 2) = b(1, 1);
    }
    return S;
}

// random physical state: S diag(n1, n1, n2, n2) S^T with a random symplectic S
Matrix4 random_state(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ang(0.0, 2 * std::numbers::pi), sq(-1.0, 1.0), n(1.0, 3.0),
        tm(-1.2, 1.2);
    Matrix4 d = Matrix4::Zero();
    const double n1 = n(rng), n2 = n(rng);
    d.diagonal() << n1, n2, n1, n2;
    Matrix4 mix = Matrix4::Identity();
    // beam splitter
    const double a = ang(rng);
    Eigen::Matrix2d bs;
    bs << std::cos(a), std::sin(a), -std::sin(a), std::cos(a);
    mix.block<2, 2>(0, 0) = bs;
    mix.block<2, 2>(2, 2) = bs;
    const Matrix4 S = local(ang(rng), sq(rng), ang(rng), sq(rng)) * two_mode_squeezer(tm(rng)) * mix *
                      local(ang(rng), sq(rng), ang(rng), sq(rng));
    return S * d * S.transpose();
}

}  // namespace

TEST_CASE("symplectic form", "[entanglement]") {
    const Matrix4 s = SymplecticForm::matrix();
    CHECK((s.transpose() + s).norm() == 0.0);
    CHECK((s * s + Matrix4::Identity()).norm() == 0.0);
    CHECK(s(0, 2) == 1.0);
    CHECK(s(2, 0) == -1.0);
}

TEST_CASE("partial transpose flips the fourth row and column", "[entanglement]") {
    CHECK(partial_transpose(Matrix4::Identity()) == Matrix4::Identity());
    Matrix4 c = Matrix4::Identity();
    c(0, 3) = c(3, 0) = 0.3;
    c(3, 3) = 1.7;
    const Matrix4 t = partial_transpose(c);
    CHECK(t(0, 3) == -0.3);
    CHECK(t(3, 0) == -0.3);
    CHECK(t(3, 3) == 1.7);
    std::mt19937_64 rng(7);
    const Matrix4 r = random_state(rng);
    CHECK(partial_transpose(partial_transpose(r)) == r);
}

TEST_CASE("symplectic eigenvalues of simple states", "[entanglement]") {
    auto nu = symplectic_eigenvalues(Matrix4::Identity());
    CHECK_THAT(nu[0], WithinAbs(1.0, 1e-14));
    CHECK_THAT(nu[1], WithinAbs(1.0, 1e-14));
    nu = symplectic_eigenvalues(Matrix4(2.5 * Matrix4::Identity()));
    CHECK_THAT(nu[0], WithinAbs(2.5, 1e-13));
    CHECK_THAT(nu[1], WithinAbs(2.5, 1e-13));
    Matrix4 c = Matrix4::Zero();
    c.diagonal() << 1.0, 3.0, 1.0, 3.0;
    nu = symplectic_eigenvalues(c);
    CHECK_THAT(nu[0], WithinAbs(1.0, 1e-13));
    CHECK_THAT(nu[1], WithinAbs(3.0, 1e-13));
}

TEST_CASE("two-mode squeezed state", "[entanglement]") {
    for (double s : {0.1, 0.5, 1.0}) {
        const Matrix4 S = two_mode_squeezer(s);
        const Matrix4 c = S * S.transpose();
        CHECK_THAT(c(0, 0), WithinRel(std::cosh(2 * s), 1e-14));
        CHECK_THAT(std::abs(c(0, 1)), WithinRel(std::sinh(2 * s), 1e-14));
        const auto nu = symplectic_eigenvalues(partial_transpose(c));
        CHECK_THAT(nu[0], WithinRel(std::exp(-2 * s), 1e-12));
        CHECK_THAT(nu[1], WithinRel(std::exp(2 * s), 1e-12));
        // independent: eigenvalues of i Sigma C from a dense complex solver
        const Eigen::Matrix4cd m = std::complex<double>(0, 1) * (SymplecticForm::matrix() * partial_transpose(c)).cast<std::complex<double>>();
        Eigen::ComplexEigenSolver<Eigen::Matrix4cd> es(m);
        double smallest = 1e300;
        for (int i = 0; i < 4; ++i) smallest = std::min(smallest, std::abs(es.eigenvalues()(i)));
        CHECK_THAT(smallest, WithinRel(std::exp(-2 * s), 1e-12));
        CHECK_THAT(log_negativity(c), WithinAbs(2 * s / std::numbers::ln2, 1e-9));
    }
}

TEST_CASE("product states carry no entanglement", "[entanglement]") {
    CHECK(log_negativity(Matrix4::Identity()) == 0.0);
    for (double n : {1.0, 1.5, 4.0}) CHECK(log_negativity(Matrix4(n * Matrix4::Identity())) == 0.0);
    CHECK(log_negativity(local(0.3, 0.8, 1.1, -0.4) * local(0.3, 0.8, 1.1, -0.4).transpose()) == 0.0);
}

TEST_CASE("unphysical input is rejected", "[entanglement]") {
    CHECK_THROWS_AS(log_negativity(Matrix4(0.5 * Matrix4::Identity())), NumericalError);
}

TEST_CASE("eigen and closed-form symplectic spectra agree on random states", "[entanglement]") {
    std::mt19937_64 rng(20240607);
    double worst = 0.0, worst_pt = 0.0, min_nu = 1e300;
    for (int i = 0; i < 1000; ++i) {
        const Matrix4 c = random_state(rng);
        for (const Matrix4& m : {c, partial_transpose(c)}) {
            const auto a = symplectic_eigenvalues(m);
            const auto b = symplectic_eigenvalues_closed_form(m);
            const double scale = std::max(1.0, a[1]);
            worst = std::max({worst, std::abs(a[0] - b[0]) / scale, std::abs(a[1] - b[1]) / scale});
        }
        min_nu = std::min(min_nu, symplectic_eigenvalues(c)[0]);
        worst_pt = std::max(worst_pt, log_negativity(c));
    }
    CHECK(worst <= 1e-10);
    CHECK(min_nu >= 1.0 - 1e-6);
    CHECK(worst_pt > 0.1);  // the sample includes entangled states
}

TEST_CASE("log negativity is invariant under local symplectic maps", "[entanglement]") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> ang(0.0, 2 * std::numbers::pi), sq(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const Matrix4 c = random_state(rng);
        const Matrix4 L = local(ang(rng), sq(rng), ang(rng), sq(rng));
        CHECK_THAT(log_negativity(L * c * L.transpose()), WithinAbs(log_negativity(c), 1e-9));
    }
}

TEST_CASE("log negativity is continuous at the separability edge", "[entanglement]") {
    double prev = 0.0;
    for (double s = 0.0; s <= 0.05; s += 1e-3) {
        const Matrix4 S = two_mode_squeezer(s);
        const double e = log_negativity(S * S.transpose());
        CHECK(e >= 0.0);
        CHECK(e - prev <= 2e-3 / std::numbers::ln2 + 1e-12);
        prev = e;
    }
}
