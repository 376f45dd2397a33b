#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>
#include <algorithm>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/special_functions/expint.hpp>

#include "catch_amalgamated.hpp"

#include "bathent/kernels.hpp"

using namespace bathent;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using cplx = std::complex<double>;

namespace {

ModelParams params(double gamma = 1, double omega_cut = 10, double temperature = 0) {
    ModelParams p;
    p.gamma = gamma;
    p.omega_cut = omega_cut;
    p.temperature = temperature;
    return p;
}

// int_0^inf e^{-st} Gamma_d(t) dt by adaptive Gauss-Kronrod, split at the kink t = d
cplx laplace_by_quadrature(cplx s, double d, const ModelParams& p) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const double end = d + 60.0 / p.omega_cut;
    auto part = [&](auto f) {
        double v = GK::integrate(f, d, end, 20, 1e-14);
        if (d > 0) v += GK::integrate(f, 0.0, d, 20, 1e-14);
        return v;
    };
    const double re = part([&](double t) { return (std::exp(-s * t) * damping_kernel(t, d, p)).real(); });
    const double im = part([&](double t) { return (std::exp(-s * t) * damping_kernel(t, d, p)).imag(); });
    return {re, im};
}

// int_0^inf w Omega^2/(Omega^2 + w^2) cos(w x) dw = -Omega^2/2 [e^{Omega x} Ei(-Omega x) + e^{-Omega x} Ei(Omega x)]
double drude_cosine(double x, double W) {
    const double z = W * x;
    return -0.5 * W * W * (std::exp(z) * boost::math::expint(-z) + std::exp(-z) * boost::math::expint(z));
}

}  // namespace

TEST_CASE("damping kernel examples", "[kernels]") {
    const auto p = params();
    CHECK_THAT(damping_kernel(0, 0, p), WithinRel(20.0, 1e-15));
    for (double d : {0.05, 0.3, 1.0})
        CHECK_THAT(damping_kernel(d, d, p), WithinRel(10.0 * (1 + std::exp(-20 * d)), 1e-14));
    CHECK_THAT(damping_kernel(1, 0.5, p), WithinRel(10.0 * (std::exp(-5.0) + std::exp(-15.0)), 1e-14));
    for (double t = 0; t < 3; t += 0.01) CHECK(damping_kernel(t, 0.2, p) > 0);
}

TEST_CASE("damping kernel is continuous in t and d", "[kernels]") {
    const auto p = params(1.3, 7);
    const double eps = 1e-9;
    for (double d : {0.0, 0.1, 0.5})
        for (double t : {0.0, 0.1, 0.2, 0.5, 1.0}) {
            CHECK_THAT(damping_kernel(t + eps, d, p), WithinAbs(damping_kernel(t, d, p), 1e-6));
            CHECK_THAT(damping_kernel(t, d + eps, p), WithinAbs(damping_kernel(t, d, p), 1e-6));
        }
}

TEST_CASE("Laplace transform at d = 0 is 2 gamma Omega/(s + Omega)", "[kernels]") {
    const auto p = params(1.7, 6);
    CHECK_THAT(std::abs(damping_kernel_laplace(6.0, 0.0, p) - cplx(1.7)), WithinAbs(0.0, 1e-14));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> re(-5.0, 30.0), im(-40.0, 40.0);
    for (int i = 0; i < 20; ++i) {
        const cplx s(re(rng), im(rng));
        const cplx exact = 2.0 * 1.7 * 6.0 / (s + 6.0);
        CHECK(std::abs(damping_kernel_laplace(s, 0.0, p) - exact) <= 1e-13 * std::abs(exact));
    }
}

TEST_CASE("Laplace transform agrees with direct quadrature", "[kernels]") {
    const auto p = params();
    for (double d : {0.0, 0.05, 0.1, 0.5})
        for (cplx s : {cplx(1, 0), cplx(1, 1), cplx(0.1, 10)}) {
            const cplx ref = laplace_by_quadrature(s, d, p);
            const cplx got = damping_kernel_laplace(s, d, p);
            INFO("d=" << d << " s=" << s);
            CHECK(std::abs(got - ref) <= 1e-8 * std::abs(ref));
        }
    CHECK(std::abs(damping_kernel_laplace(cplx(1, 0), 0.1, p) - laplace_by_quadrature(1.0, 0.1, p)) <= 1e-10);
}

TEST_CASE("Laplace transform decays with distance and rejects the left half-plane", "[kernels]") {
    const auto p = params();
    CHECK(std::abs(damping_kernel_laplace(cplx(1, 2), 40.0, p)) < 1e-15);
    CHECK_THROWS_AS(damping_kernel_laplace(cplx(-10, 0), 0.1, p), NumericalError);
    CHECK_THROWS_AS(damping_kernel_laplace(cplx(-11, 3), 0.1, p), NumericalError);
    // imaginary axis is inside the region
    CHECK(std::isfinite(std::abs(damping_kernel_laplace(cplx(0, 3), 0.1, p))));
}

TEST_CASE("difference kernel matches Gamma_0 - Gamma_d", "[kernels]") {
    const auto p = params();
    for (double d : {0.3, 1.0})
        for (cplx s : {cplx(1, 0), cplx(0.2, 5), cplx(0, 12)}) {
            const cplx direct = damping_kernel_laplace(s, 0.0, p) - damping_kernel_laplace(s, d, p);
            CHECK(std::abs(damping_kernel_laplace_difference(s, d, p) - direct) <= 1e-12 * std::abs(direct));
        }
    // small d takes the series path; the difference is O(d^2)
    const cplx small = damping_kernel_laplace_difference(cplx(1, 0), 1e-6, p);
    CHECK(small.real() > 0);
    CHECK(small.real() < 1e-8);
}

TEST_CASE("noise spectrum examples", "[kernels]") {
    CHECK_THAT(noise_spectrum(10.0, params()), WithinRel(40.0 / std::numbers::pi, 1e-14));
    const auto warm = params(1, 10, 0.3);
    CHECK_THAT(noise_spectrum(0.0, warm), WithinRel(16 * 0.3 / std::numbers::pi, 1e-14));
    CHECK_THAT(noise_spectrum(1e-9, warm), WithinRel(16 * 0.3 / std::numbers::pi, 1e-8));
    const double w = 1e5;
    CHECK_THAT(noise_spectrum(w, params()), WithinRel(800.0 / (std::numbers::pi * w), 1e-8));
}

TEST_CASE("noise spectrum is finite, positive and decreasing above its maximum", "[kernels]") {
    for (double T : {0.0, 0.05, 0.3, 2.0}) {
        const auto p = params(1, 10, T);
        std::vector<double> s;
        for (double w = 0.0; w < 200.0; w += 0.05) s.push_back(noise_spectrum(w, p));
        const auto peak = std::size_t(std::max_element(s.begin(), s.end()) - s.begin());
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(std::isfinite(s[i]));
            CHECK(s[i] >= 0.0);
            if (i > peak) CHECK(s[i] < s[i - 1]);
        }
    }
}

TEST_CASE("thermal factor branches agree", "[kernels]") {
    CHECK(thermal_factor(3.0, 0.0) == 1.0);
    const double T = 0.5;
    for (double w : {0.99e-4 * T, 1.01e-4 * T}) {
        const double x = w / (2 * T);
        CHECK_THAT(thermal_factor(w, T), WithinRel(std::cosh(x) / std::sinh(x), 1e-10));
    }
}

TEST_CASE("noise kernel diagonal entry is the r = 0 cross entry", "[kernels]") {
    const auto p = params();
    CHECK(noise_kernel_entry(0.7, 0.0, p) == noise_kernel_entry(0.7, 0.0, p));
    CHECK_THROWS_AS(noise_kernel_entry(0.0, 0.0, p), NumericalError);
    try {
        noise_kernel_entry(0.0, 0.0, p);
    } catch (const NumericalError& e) {
        CHECK(e.failure() == NumericalFailure::LogDivergent);
    }
}

TEST_CASE("noise kernel at T = 0 matches the exponential-integral form", "[kernels]") {
    const auto p = params();
    const double pref = 8.0 / std::numbers::pi;
    for (auto [tau, r] : {std::pair{1.0, 0.1}, {0.3, 0.0}, {2.5, 0.4}, {0.05, 0.5}}) {
        const double ref = pref * 0.5 * (drude_cosine(std::abs(tau - r), 10) + drude_cosine(tau + r, 10));
        INFO("tau=" << tau << " r=" << r);
        CHECK_THAT(noise_kernel_entry(tau, r, p), WithinAbs(ref, 1e-8 * std::max(1.0, std::abs(ref))));
    }
}

TEST_CASE("noise kernel at T > 0 matches an Ooura cosine transform", "[kernels]") {
    const auto p = params(1, 10, 0.3);
    const NoiseSpectrum S(p);
    for (auto [tau, r] : {std::pair{1.0, 0.1}, {0.5, 0.0}}) {
        auto F = [&](double x) {
            boost::math::quadrature::ooura_fourier_cos<double> oc(1e-12, 8);
            // S(w) = 8/pi Omega^2 w/(Omega^2+w^2) (coth - 1) + T = 0 part; the T = 0 part is closed form
            auto thermal = [&](double w) {
                return w == 0.0 ? S(0.0) : S(w) - (8.0 / std::numbers::pi) * w * 100.0 / (100.0 + w * w);
            };
            return oc.integrate(thermal, x).first + (8.0 / std::numbers::pi) * drude_cosine(x, 10);
        };
        const double ref = 0.5 * (F(std::abs(tau - r)) + F(tau + r));
        CHECK_THAT(noise_kernel_entry(tau, r, p), WithinAbs(ref, 1e-8 * std::max(1.0, std::abs(ref))));
    }
}
