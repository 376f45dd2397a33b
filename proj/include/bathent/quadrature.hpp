#pragma once

// Quadrature building blocks shared by the kernel and covariance modules.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_expint.h>

#include "bathent/error.hpp"

namespace bathent::quad {

struct Node {
    double x;
    double w;
};

/// Appends a Gauss-Legendre rule (10, 15, 20 or 30 points) on [a, b] to `out`.
inline void append_gauss_legendre(double a, double b, std::vector<Node>& out, std::size_t order = 20) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (b + a);
    auto emit = [&](const auto& abscissa, const auto& weights) {
        // boost stores the non-negative half of a symmetric rule
        for (std::size_t i = 0; i < abscissa.size(); ++i) {
            const double xi = abscissa[i];
            const double wi = weights[i] * half;
            if (xi == 0.0) {
                out.push_back({mid, wi});
            } else {
                out.push_back({mid - half * xi, wi});
                out.push_back({mid + half * xi, wi});
            }
        }
    };
    switch (order) {
        case 10: {
            using G = boost::math::quadrature::gauss<double, 10>;
            emit(G::abscissa(), G::weights());
            break;
        }
        case 15: {
            using G = boost::math::quadrature::gauss<double, 15>;
            emit(G::abscissa(), G::weights());
            break;
        }
        case 30: {
            using G = boost::math::quadrature::gauss<double, 30>;
            emit(G::abscissa(), G::weights());
            break;
        }
        default: {
            using G = boost::math::quadrature::gauss<double, 20>;
            emit(G::abscissa(), G::weights());
            break;
        }
    }
}

/// Adaptive Gauss-Kronrod over consecutive breakpoints. Returns the sum of the
/// panel integrals; `error` receives the summed error estimates.
template <class F>
double integrate_panels(F&& f, const std::vector<double>& breaks, double tol, double* error = nullptr) {
    double total = 0.0;
    double err_total = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (!(breaks[i + 1] > breaks[i])) continue;
        double err = 0.0;
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            f, breaks[i], breaks[i + 1], 15, tol, &err);
        err_total += err;
    }
    if (error) *error = err_total;
    return total;
}

/// Cosine integral Ci(x) = -int_x^inf cos(t)/t dt for x > 0.
inline double cosine_integral(double x) {
    gsl_sf_result r;
    const int status = gsl_sf_Ci_e(x, &r);
    if (status != GSL_SUCCESS)
        throw NumericalError(NumericalFailure::Domain, "Ci evaluation failed at x=" + std::to_string(x));
    return r.val;
}

/// int_W^inf cos(x w) / w dw = -Ci(x W) for x > 0.
inline double cos_tail_1(double x, double W) {
    return -cosine_integral(std::abs(x) * W);
}

/// int_W^inf cos(x w) / w^3 dw, closed form through Ci.
inline double cos_tail_3(double x, double W) {
    x = std::abs(x);
    if (x == 0.0) return 0.5 / (W * W);
    const double z = x * W;
    return std::cos(z) / (2.0 * W * W) - x * std::sin(z) / (2.0 * W) + 0.5 * x * x * cosine_integral(z);
}

/// Moments mu_k(theta) = int_0^1 xi^k exp(i theta xi) dxi, k = 0..3.
inline std::array<std::complex<double>, 4> oscillatory_moments(double theta) {
    using cd = std::complex<double>;
    std::array<cd, 4> mu{};
    if (std::abs(theta) < 2.0) {
        // power series; converges quickly for |theta| < 2
        cd term = 1.0;  // (i theta)^n / n!
        for (int n = 0; n < 40; ++n) {
            for (int k = 0; k < 4; ++k) mu[k] += term / double(n + k + 1);
            term *= cd(0.0, theta) / double(n + 1);
            if (std::abs(term) < 1e-18) break;
        }
        return mu;
    }
    const cd e = std::exp(cd(0.0, theta));
    const cd inv = 1.0 / cd(0.0, theta);
    mu[0] = (e - 1.0) * inv;
    for (int k = 1; k < 4; ++k) mu[k] = (e - double(k) * mu[k - 1]) * inv;
    return mu;
}

/// Filon weights for a cubic Hermite interpolant on one panel:
/// int_0^1 p(xi) exp(i theta xi) dxi with
/// p = f0 H00 + f1 H01 + d0 H10 + d1 H11 (d = derivative times panel width).
struct HermiteFilonWeights {
    std::complex<double> f0, f1, d0, d1;
};

inline HermiteFilonWeights hermite_filon_weights(double theta) {
    const auto mu = oscillatory_moments(theta);
    return {
        mu[0] - 3.0 * mu[2] + 2.0 * mu[3],
        3.0 * mu[2] - 2.0 * mu[3],
        mu[1] - 2.0 * mu[2] + mu[3],
        -mu[2] + mu[3],
    };
}

}  // namespace bathent::quad
