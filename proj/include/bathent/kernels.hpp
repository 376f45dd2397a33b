#pragma once

// Damping kernel Gamma_d(t), its Laplace transform, and the bath noise
// spectrum. All functions are pure in (arguments, params).

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "bathent/error.hpp"
#include "bathent/model.hpp"
#include "bathent/quadrature.hpp"

namespace bathent {

using cplx = std::complex<double>;

/// Gamma_d(t) = gamma Omega (exp(-Omega |t - d|) + exp(-Omega |t + d|)).
inline double damping_kernel(double t, double d, const ModelParams& p) {
    const double W = p.omega_cut;
    return p.gamma * W * (std::exp(-W * std::abs(t - d)) + std::exp(-W * std::abs(t + d)));
}

namespace detail {

// (exp(z) - 1) / z, accurate near z = 0
inline cplx exprel(cplx z) {
    if (std::abs(z) < 0.5) {
        cplx sum = 1.0, term = 1.0;
        for (int n = 2; n < 30; ++n) {
            term *= z / double(n);
            sum += term;
            if (std::abs(term) < 1e-17 * std::abs(sum)) break;
        }
        return sum;
    }
    return (std::exp(z) - 1.0) / z;
}

}  // namespace detail

/// Closed-form Laplace transform of Gamma_d,
///   gamma Omega [ (e^{-sd} - e^{-Omega d})/(Omega - s) + (e^{-sd} + e^{-Omega d})/(s + Omega) ].
/// The first bracket is entire in s; the second needs Re s > -Omega.
inline cplx damping_kernel_laplace(cplx s, double d, const ModelParams& p) {
    const double W = p.omega_cut;
    if (!(s.real() > -W))
        throw NumericalError(NumericalFailure::Domain,
                             "Laplace transform of the damping kernel needs Re(s) > -Omega");
    const cplx es = std::exp(-s * d);
    const double ew = std::exp(-W * d);
    const cplx z = (W - s) * d;
    cplx first;
    if (std::abs(z) < 0.5)
        first = ew * d * detail::exprel(z);
    else
        first = (es - ew) / (W - s);
    return p.gamma * W * (first + (es + ew) / (s + W));
}

namespace detail {

// e^{-z} - 1 + z without cancellation for small |z|
inline cplx phi2(cplx z) {
    if (std::abs(z) < 0.5) {
        cplx term = z * z / 2.0, sum = term;
        for (int n = 3; n < 30; ++n) {
            term *= -z / double(n);
            sum += term;
            if (std::abs(term) < 1e-17 * std::abs(sum)) break;
        }
        return sum;
    }
    return std::exp(-z) - 1.0 + z;
}

}  // namespace detail

/// Gamma_0(s) - Gamma_d(s) = 2 gamma Omega [s phi2(Omega d) - Omega phi2(s d)] / (Omega^2 - s^2),
/// which stays accurate as d -> 0 where both transforms nearly cancel.
inline cplx damping_kernel_laplace_difference(cplx s, double d, const ModelParams& p) {
    const double W = p.omega_cut;
    if (std::abs(W - s) < 1e-3 * W)
        return damping_kernel_laplace(s, 0.0, p) - damping_kernel_laplace(s, d, p);
    if (!(s.real() > -W))
        throw NumericalError(NumericalFailure::Domain,
                             "Laplace transform of the damping kernel needs Re(s) > -Omega");
    const cplx num = s * detail::phi2(cplx(W * d, 0.0)) - W * detail::phi2(s * d);
    return 2.0 * p.gamma * W * num / (W * W - s * s);
}

/// coth(w / 2T), evaluated as 1 + 2/(e^{w/T} - 1); series 2T/w + w/(6T) for w/T < 1e-4.
/// Exactly 1 at T = 0.
inline double thermal_factor(double omega, double temperature) {
    if (temperature == 0.0) return 1.0;
    const double x = omega / temperature;
    if (x < 1e-4) return 2.0 * temperature / omega + omega / (6.0 * temperature);
    return 1.0 + 2.0 / std::expm1(x);
}

/// Bath noise spectrum S(w) = (8 gamma / pi omega0) w Omega^2/(Omega^2 + w^2) coth(w / 2T),
/// the integrand of the noise-kernel entries K33 and K34.
class NoiseSpectrum {
public:
    explicit NoiseSpectrum(const ModelParams& params) : params_(&params) {}

    double operator()(double omega) const {
        const ModelParams& p = *params_;
        const double W2 = p.omega_cut * p.omega_cut;
        const double pref = 8.0 * p.gamma / (std::numbers::pi * ModelParams::omega0);
        if (omega == 0.0) {
            // w coth(w/2T) -> 2T
            return p.temperature > 0.0 ? pref * 2.0 * p.temperature : 0.0;
        }
        return pref * omega * W2 / (W2 + omega * omega) * thermal_factor(omega, p.temperature);
    }

    /// Weight entering the covariance integrals. It is half of S(w): the
    /// symmetrized force correlator of the coupling Hamiltonian, in the
    /// doubled covariance convention, integrates S(w)/2 against cos(w tau).
    double covariance_weight(double omega) const { return 0.5 * (*this)(omega); }

    const ModelParams& params() const { return *params_; }

private:
    const ModelParams* params_;
};

inline double noise_spectrum(double omega, const ModelParams& p) { return NoiseSpectrum(p)(omega); }

namespace detail {

// int_0^inf S(w) cos(w x) dw for x > 0, regularized by cutting the cosine
// transform of the 1/w tail analytically.
inline double noise_cosine_transform(double x, const ModelParams& p) {
    const NoiseSpectrum S(p);
    const double W = p.omega_cut;
    const double w_max = std::max(50.0 * W, 50.0 / x);
    const double half_period = std::numbers::pi / x;

    std::vector<quad::Node> nodes;
    double a = 0.0;
    while (a < w_max) {
        double width = std::min(half_period, std::max(W / 8.0, 0.5 * a));
        if (a < 4.0 * W) width = std::min(width, W / 8.0);
        // thermal structure near w ~ T
        if (p.temperature > 0.0 && a < 4.0 * p.temperature) width = std::min(width, p.temperature / 2.0);
        const double b = std::min(a + width, w_max);
        quad::append_gauss_legendre(a, b, nodes, 20);
        a = b;
    }
    double body = 0.0;
    for (const auto& n : nodes) body += n.w * S(n.x) * std::cos(n.x * x);

    // Tail: S(w) = pref * Omega^2 Re[(w - i Omega)^{-1}] once coth == 1.
    // Asymptotic expansion of int_W^inf e^{i x w} f(w) dw with
    // f^{(n)}(w) = pref Omega^2 Re[(-1)^n n! (w - i Omega)^{-n-1}].
    const double pref = 8.0 * p.gamma / std::numbers::pi * W * W;
    const cplx ix(0.0, x);
    const cplx base = 1.0 / cplx(w_max, -W);
    cplx sum = 0.0;
    cplx deriv = base;  // n! (w - i Omega)^{-n-1} times (-1)^n
    cplx ixpow = ix;    // (ix)^{n+1}
    double last = std::numeric_limits<double>::infinity();
    for (int n = 0; n < 40; ++n) {
        // (-1)^n f^{(n)} = n! (w - iW)^{-n-1} (the signs cancel)
        const cplx term = deriv / ixpow;
        if (std::abs(term) > last) break;
        last = std::abs(term);
        sum += cplx(deriv.real(), 0.0) / ixpow;
        if (std::abs(term) < 1e-18) break;
        deriv *= double(n + 1) * base;
        ixpow *= ix;
    }
    const double tail = (-std::exp(cplx(0.0, x * w_max)) * pref * sum).real();
    return body + tail;
}

}  // namespace detail

/// K34(tau) = int_0^inf S(w) cos(w tau) cos(w r) dw; with r = 0 this is K33.
/// Diagnostic only: the covariance path integrates S(w) directly. The integral
/// diverges logarithmically whenever tau == r, including tau = r = 0.
inline double noise_kernel_entry(double tau, double r, const ModelParams& p) {
    if (tau < 0.0) throw NumericalError(NumericalFailure::Domain, "noise kernel needs tau >= 0");
    const double x_minus = std::abs(tau - r);
    const double x_plus = tau + r;
    if (x_minus == 0.0)
        throw NumericalError(NumericalFailure::LogDivergent,
                             "noise kernel diverges at tau = r (tau=" + std::to_string(tau) + ")");
    return 0.5 * (detail::noise_cosine_transform(x_minus, p) + detail::noise_cosine_transform(x_plus, p));
}

}  // namespace bathent
