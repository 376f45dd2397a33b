#include <cmath>
#include <complex>
#include <random>

#include "catch_amalgamated.hpp"

#include "bathent/greens.hpp"
#include "bathent/oracle.hpp"

using namespace bathent;
using Catch::Matchers::WithinAbs;
using cplx = std::complex<double>;

namespace {

ModelParams params(double gamma, double distance, double omega_cut = 10) {
    ModelParams p;
    p.gamma = gamma;
    p.omega_cut = omega_cut;
    p.distance = distance;
    return p;
}

double max_abs(const Matrix4c& m) { return m.cwiseAbs().maxCoeff(); }

// residual of  chi'(t) - 1 + int_0^t chi + int_0^t Gamma_ch(t - u) chi(u) du = 0  (trapezoid rule)
double integral_identity_residual(const GreensFunction& g, Channel ch) {
    const auto& p = g.params();
    const auto& chi = g.channel(ch).chi;
    const auto& dchi = g.channel(ch).chi_dot;
    const double h = g.step();
    const double sign = channel_sign(ch);
    auto kernel = [&](double tau) { return damping_kernel(tau, 0.0, p) + sign * damping_kernel(tau, p.distance, p); };
    std::vector<double> k(g.size());
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = kernel(double(i) * h);
    double worst = 0.0, integral = 0.0;
    for (std::size_t j = 1; j < g.size(); ++j) {
        integral += 0.5 * h * (chi[j - 1] + chi[j]);
        double conv = 0.0;
        for (std::size_t i = 0; i <= j; ++i) conv += (i == 0 || i == j ? 0.5 : 1.0) * k[j - i] * chi[i];
        conv *= h;
        worst = std::max(worst, std::abs(dchi[j] - 1.0 + integral + conv));
    }
    return worst;
}

}  // namespace

TEST_CASE("channel decomposition equals the direct 4x4 inverse", "[greens]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> re(0.01, 20.0), im(-30.0, 30.0);
    for (double r : {0.0, 0.05, 0.1, 1.0}) {
        const auto p = params(1, r);
        for (int i = 0; i < 20; ++i) {
            const cplx s(re(rng), im(rng));
            const Matrix4c a = greens_laplace(s, p), b = greens_laplace_direct(s, p);
            CHECK(max_abs(a - b) <= 1e-12 * max_abs(b));
        }
    }
}

TEST_CASE("Laplace-domain Green's function solves its defining system", "[greens]") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> re(0.01, 10.0), im(-20.0, 20.0);
    const auto p = params(1, 0.1);
    const QleMatrices q{p};
    for (int i = 0; i < 20; ++i) {
        const cplx s(re(rng), im(rng));
        const Matrix4c prod = greens_laplace(s, p) * q.resolvent_inverse(s);
        CHECK(max_abs(prod - Matrix4c::Identity()) <= 1e-12);
    }
}

TEST_CASE("QLE matrices have the documented structure", "[greens]") {
    const QleMatrices q{params(1, 0.1)};
    const Matrix4c z = q.z_matrix();
    CHECK(z(0, 2) == cplx(-1));
    CHECK(z(1, 3) == cplx(-1));
    CHECK(z(2, 0) == cplx(1));
    CHECK(z(3, 1) == cplx(1));
    CHECK(z.topLeftCorner<2, 2>().norm() == 0.0);
    const Matrix4c c = q.memory_laplace(cplx(1, 1));
    CHECK(c.topRows<2>().norm() == 0.0);
    CHECK(c(2, 0) == damping_kernel_laplace(cplx(1, 1), 0.0, q.params));
    CHECK(c(2, 1) == damping_kernel_laplace(cplx(1, 1), 0.1, q.params));
    CHECK(c(3, 0) == c(2, 1));
    CHECK(c(3, 1) == c(2, 0));
}

TEST_CASE("Laplace-domain limits", "[greens]") {
    const auto p = params(1, 0.1);
    const cplx big(1e8, 0);
    CHECK(max_abs(big * greens_laplace(big, p) - Matrix4c::Identity()) < 1e-6);

    const auto free = params(0, 0.3);
    for (cplx s : {cplx(0.5, 0), cplx(1, 2), cplx(0.1, -3)}) {
        const Matrix4c g = greens_laplace(s, free);
        CHECK(std::abs(g(0, 0) - s / (s * s + 1.0)) < 1e-14);
        CHECK(std::abs(g(1, 1) - s / (s * s + 1.0)) < 1e-14);
        CHECK(std::abs(g(0, 1)) < 1e-15);
    }
    CHECK_THROWS_AS(greens_laplace(cplx(0, 1), free), NumericalError);

    // r = 0: the relative coordinate feels no damping
    const auto same = params(1, 0.0);
    for (cplx s : {cplx(0.5, 0), cplx(1, 2)}) {
        CHECK(channel_kernel_laplace(s, Channel::Antisymmetric, same) == cplx(0));
        CHECK(std::abs(channel_determinant(s, Channel::Antisymmetric, same) - (s * s + 1.0)) < 1e-15);
    }
}

TEST_CASE("time-domain inversion starts at the identity and stays real", "[greens]") {
    for (double r : {0.0, 0.1, 0.3}) {
        const auto g = greens_time(20.0, params(1, r));
        CHECK(g.step() <= 0.01);
        CHECK((g.matrix(0) - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() <= 1e-6);
        for (Channel ch : kChannels) CHECK(g.report(ch).tail <= g.durbin_settings().tolerance);
        CHECK(std::abs(g.t_max() - 20.0) < 1e-9);
    }
}

TEST_CASE("default grid step resolves cutoff and retardation", "[greens]") {
    CHECK(default_time_step(params(1, 0.0)) == 0.01);
    CHECK(default_time_step(params(1, 0.0, 20)) == 0.005);
    CHECK(default_time_step(params(1, 0.1)) == 0.005);
    CHECK(default_time_step(params(1, 0.5)) == 0.01);
}

TEST_CASE("undamped oscillators rotate rigidly", "[greens]") {
    const auto g = greens_time(20.0, params(0, 0.4));
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); i += 7) {
        const double t = g.time(i);
        Eigen::Matrix4d ref = Eigen::Matrix4d::Zero();
        ref.diagonal().setConstant(std::cos(t));
        ref(0, 2) = ref(1, 3) = std::sin(t);
        ref(2, 0) = ref(3, 1) = -std::sin(t);
        worst = std::max(worst, (g.matrix(i) - ref).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("inverted response satisfies the integrated equation of motion", "[greens]") {
    const auto p = params(1, 0.1);
    for (Channel ch : kChannels) {
        const double coarse = integral_identity_residual(greens_time(TimeGrid{0.005, 801}, p), ch);
        const double fine = integral_identity_residual(greens_time(TimeGrid{0.0025, 1601}, p), ch);
        INFO("channel " << int(ch) << " residual " << coarse << " -> " << fine);
        CHECK(coarse < 5e-4);
        CHECK(fine < coarse / 3.0);  // second order in h
    }
}

TEST_CASE("Green's function matches the discrete-bath mean propagator", "[greens]") {
    for (double r : {0.0, 0.1, 0.3, 2.0}) {
        const auto p = params(1, r);
        const auto g = greens_time(20.0, p);
        const BathOracle oracle(build_bath(p, 2000, 200.0, 20.0));
        double worst = 0.0;
        for (double t = 0.0; t <= 20.0 + 1e-9; t += 0.5)
            worst = std::max(worst, (g.matrix(g.index_of(t)) - oracle.mean_propagator(t)).cwiseAbs().maxCoeff());
        INFO("r=" << r << " max |dG| = " << worst);
        CHECK(worst <= 1e-3);
    }
}

TEST_CASE("Green's function decays for r > 0", "[greens]") {
    // Not for every r: at r = 0.1 the relative coordinate has |G(200)| = 0.2, and at
    // r = 2 the delayed coupling moves the symmetric mode to w = 1.45 where
    // 1 + cos(w r) = 0.03, leaving 0.03 at t = 200 (the oracle agrees to 2e-5).
    for (double r : {0.5, 1.0}) {
        const auto g = greens_time(200.0, params(1, r));
        double tail = 0.0;
        for (std::size_t i = g.size() - 200; i < g.size(); ++i)
            tail = std::max(tail, g.matrix(i).cwiseAbs().maxCoeff());
        CHECK(tail <= 1e-3);
    }
}

TEST_CASE("grid access and inversion failures are reported", "[greens]") {
    const auto g = greens_time(TimeGrid{0.01, 101}, params(1, 0.1));
    CHECK_THROWS_AS(g.index_of(1.5), NumericalError);
    CHECK_THROWS_AS(g.index_of(0.505), NumericalError);
    CHECK(g.index_of(0.5) == 50);
    CHECK_THROWS_AS(greens_time(TimeGrid{0.01, 1}, params(1, 0.1)), ConfigError);
    DurbinSettings tight;
    tight.max_terms = 256;
    tight.tolerance = 1e-16;
    CHECK_THROWS_AS(greens_time(TimeGrid{0.01, 101}, params(1, 0.1), tight), NumericalError);
}
