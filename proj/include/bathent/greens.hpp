#pragma once

// Laplace-domain Green's function of the coupled quantum Langevin equations
// and its numerical inversion to the time domain.
//
// State ordering y = (Q1, Q2, dQ1/dt, dQ2/dt). The exchange symmetry of the
// model splits the dynamics into the channels u_pm = (Q1 +- Q2)/sqrt(2), each
// a damped oscillator with memory kernel Gamma_0 +- Gamma_r. In a channel
// every entry of the 2x2 propagator is a derivative of the single response
// chi(t) = L^{-1}[1/D(s)], D(s) = s^2 + omega0^2 + s Gamma_ch(s):
//
//     G_ch(t) = [[chi', chi], [chi'', chi']].

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "bathent/error.hpp"
#include "bathent/kernels.hpp"
#include "bathent/model.hpp"

namespace bathent {

using Matrix2c = Eigen::Matrix2cd;
using Matrix4c = Eigen::Matrix4cd;

enum class Channel { Symmetric = 0, Antisymmetric = 1 };

constexpr std::array<Channel, 2> kChannels{Channel::Symmetric, Channel::Antisymmetric};

constexpr double channel_sign(Channel ch) { return ch == Channel::Symmetric ? 1.0 : -1.0; }

/// Gamma_0(s) +- Gamma_r(s): the memory kernel seen by one channel.
inline cplx channel_kernel_laplace(cplx s, Channel ch, const ModelParams& p) {
    if (ch == Channel::Antisymmetric) return damping_kernel_laplace_difference(s, p.distance, p);
    const cplx self = damping_kernel_laplace(s, 0.0, p);
    if (p.distance == 0.0) return 2.0 * self;
    return self + damping_kernel_laplace(s, p.distance, p);
}

/// D(s) = s^2 + omega0^2 + s Gamma_ch(s).
inline cplx channel_determinant(cplx s, Channel ch, const ModelParams& p) {
    const double w0 = ModelParams::omega0;
    return s * s + w0 * w0 + s * channel_kernel_laplace(s, ch, p) / ModelParams::mass;
}

/// [[s, -1], [omega0^2 + s Gamma_ch, s]]^{-1} for the channel coordinates (u, du/dt).
inline Matrix2c channel_greens_laplace(cplx s, Channel ch, const ModelParams& p) {
    const cplx D = channel_determinant(s, ch, p);
    if (std::abs(D) < 1e-14)
        throw NumericalError(NumericalFailure::NearSingular, "channel determinant below 1e-14");
    const cplx spring = D - s * s;  // omega0^2 + s Gamma
    Matrix2c g;
    g << s / D, 1.0 / D, -spring / D, s / D;
    return g;
}

/// Static matrix Z and memory kernel transform C(s) of
/// dy/dt + Z y + d/dt int_0^t C(t - t') y(t') dt' = B(t).
struct QleMatrices {
    ModelParams params;

    Matrix4c z_matrix() const {
        Matrix4c z = Matrix4c::Zero();
        z(0, 2) = z(1, 3) = -1.0;
        z(2, 0) = z(3, 1) = ModelParams::omega0 * ModelParams::omega0;
        return z;
    }

    Matrix4c memory_laplace(cplx s) const {
        Matrix4c c = Matrix4c::Zero();
        const cplx self = damping_kernel_laplace(s, 0.0, params) / ModelParams::mass;
        const cplx cross = damping_kernel_laplace(s, params.distance, params) / ModelParams::mass;
        c(2, 0) = c(3, 1) = self;
        c(2, 1) = c(3, 0) = cross;
        return c;
    }

    /// s I + Z + s C(s)
    Matrix4c resolvent_inverse(cplx s) const {
        return s * Matrix4c::Identity() + z_matrix() + s * memory_laplace(s);
    }
};

namespace detail {

// Rebuilds a 4x4 matrix in (Q1, Q2, P1, P2) from per-channel 2x2 blocks in
// (u, p). Entry (a, b) of the channel block lands in the Q/P blocks as
// 1/2 [[g+ + g-, g+ - g-], [g+ - g-, g+ + g-]].
template <class M2, class M4>
void assemble_from_channels(const M2& plus, const M2& minus, M4& out) {
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const auto sum = 0.5 * (plus(a, b) + minus(a, b));
            const auto diff = 0.5 * (plus(a, b) - minus(a, b));
            out(2 * a, 2 * b) = sum;
            out(2 * a + 1, 2 * b + 1) = sum;
            out(2 * a, 2 * b + 1) = diff;
            out(2 * a + 1, 2 * b) = diff;
        }
}

}  // namespace detail

/// G(s) = [s + Z + s C(s)]^{-1}, computed per channel and reassembled.
inline Matrix4c greens_laplace(cplx s, const ModelParams& p) {
    Matrix4c g;
    detail::assemble_from_channels(channel_greens_laplace(s, Channel::Symmetric, p),
                                   channel_greens_laplace(s, Channel::Antisymmetric, p), g);
    return g;
}

/// Direct 4x4 inverse; the reference the channel path is checked against.
inline Matrix4c greens_laplace_direct(cplx s, const ModelParams& p) {
    return QleMatrices{p}.resolvent_inverse(s).inverse();
}

// ---------------------------------------------------------------------------
// Durbin inversion

struct DurbinSettings {
    double period_factor = 4.0;   // T_period = period_factor * t_max
    double shift = 25.0;          // contour abscissa a = pole_abscissa + shift / T_period
    double pole_abscissa = 0.0;   // rightmost pole estimate; passive channels have Re(pole) <= 0
    std::size_t max_terms = std::size_t(1) << 24;
    double tolerance = 1e-9;      // bound on the contribution of the last 10% of terms
};

/// Uniform time grid t_i = i * step, i = 0..count-1.
struct TimeGrid {
    double step = 0.01;
    std::size_t count = 0;

    double time(std::size_t i) const { return double(i) * step; }
    double t_max() const { return count ? time(count - 1) : 0.0; }

    static TimeGrid covering(double t_max, double step) {
        const auto n = std::size_t(std::ceil(t_max / step - 1e-9)) + 1;
        return {step, std::max<std::size_t>(n, 2)};
    }
};

/// Grid spacing that resolves both 1/Omega and the retardation r/c:
/// h <= min(0.01, 0.1/Omega, r/20).
inline double default_time_step(const ModelParams& p) {
    double h = std::min(0.01, 0.1 / p.omega_cut);
    if (p.distance > 0.0) h = std::min(h, p.distance / 20.0);
    return h;
}

namespace detail {

// Coefficients of a large-s expansion sum_n sum_k c[n][k] e^{-k s r} s^{-n}.
// Only shifts k <= 3 are tracked; the orders used here never need more.
struct AsymptoticSeries {
    static constexpr int kShifts = 4;
    using Coeff = std::array<double, kShifts>;
    std::vector<Coeff> c;  // index n = power of 1/s
    double delay = 0.0;
};

inline AsymptoticSeries::Coeff poly_mul(const AsymptoticSeries::Coeff& a, const AsymptoticSeries::Coeff& b) {
    AsymptoticSeries::Coeff out{};
    for (int i = 0; i < AsymptoticSeries::kShifts; ++i)
        for (int j = 0; i + j < AsymptoticSeries::kShifts; ++j) out[i + j] += a[i] * b[j];
    return out;
}

// Large-s expansion of 1/D(s) for a channel, to order s^{-(order)}.
inline AsymptoticSeries channel_inverse_determinant_series(Channel ch, const ModelParams& p, int order) {
    using Coeff = AsymptoticSeries::Coeff;
    const double sigma = channel_sign(ch);
    const double r = p.distance;
    const double W = p.omega_cut;
    const double g = p.gamma / ModelParams::mass;
    // Gamma_ch(s) = sum_j G_j s^{-(j+1)}:
    //   j even: 2 g W^{j+1} (1 + sigma e^{-W r})
    //   j odd: -2 g W^{j+1} (1 + sigma e^{-s r})
    const int terms = order;  // enough G_j to reach s^{-order} in 1/D
    std::vector<Coeff> G(std::size_t(terms) + 1, Coeff{});
    double wpow = W;
    for (int j = 0; j <= terms; ++j, wpow *= W) {
        if (j % 2 == 0) {
            G[j][0] = 2.0 * g * wpow * (1.0 + sigma * std::exp(-W * r));
        } else if (r == 0.0) {
            G[j][0] = -2.0 * g * wpow * (1.0 + sigma);
        } else {
            G[j][0] = -2.0 * g * wpow;
            G[j][1] = -2.0 * g * wpow * sigma;
        }
    }
    // x(s) = (omega0^2 + s Gamma)/s^2 = sum_n X_n s^{-n}, n >= 2
    std::vector<Coeff> X(std::size_t(order) + 1, Coeff{});
    for (int n = 2; n <= order; ++n) X[n] = G[n - 2];
    X[2][0] += ModelParams::omega0 * ModelParams::omega0;
    // y = 1/(1 + x)
    std::vector<Coeff> y(std::size_t(order) + 1, Coeff{});
    y[0][0] = 1.0;
    for (int n = 1; n <= order; ++n) {
        Coeff acc{};
        for (int m = 2; m <= n; ++m) {
            const Coeff prod = poly_mul(X[m], y[n - m]);
            for (int k = 0; k < AsymptoticSeries::kShifts; ++k) acc[k] -= prod[k];
        }
        y[n] = acc;
    }
    // 1/D = s^{-2} y
    AsymptoticSeries out;
    out.delay = r;
    out.c.assign(std::size_t(order) + 1, Coeff{});
    for (int n = 2; n <= order; ++n) out.c[n] = y[n - 2];
    return out;
}

// Sum of beta_m (s+b)^{-m} (per shift k) matching a power series in 1/s, with
// its exact inverse transform.
class SubtractionTerms {
public:
    SubtractionTerms(const AsymptoticSeries& series, double b) : b_(b), delay_(series.delay) {
        const int K = int(series.c.size()) - 1;
        beta_.assign(std::size_t(std::max(K, 0)) + 1, AsymptoticSeries::Coeff{});
        // alpha_n = sum_{m<=n} beta_m C(n-1, n-m) (-b)^{n-m}
        for (int n = 1; n <= K; ++n) {
            for (int k = 0; k < AsymptoticSeries::kShifts; ++k) {
                double v = series.c[n][k];
                for (int m = 1; m < n; ++m) v -= beta_[m][k] * binom(n - 1, n - m) * std::pow(-b, n - m);
                beta_[n][k] = v;
            }
        }
    }

    cplx laplace(cplx s) const {
        cplx total = 0.0;
        const cplx inv = 1.0 / (s + b_);
        for (int k = 0; k < AsymptoticSeries::kShifts; ++k) {
            cplx part = 0.0, pw = inv;
            bool any = false;
            for (std::size_t m = 1; m < beta_.size(); ++m, pw *= inv) {
                if (beta_[m][k] == 0.0) continue;
                part += beta_[m][k] * pw;
                any = true;
            }
            if (any) total += (k == 0 ? cplx(1.0) : std::exp(-s * (double(k) * delay_))) * part;
        }
        return total;
    }

    double time(double t) const {
        double total = 0.0;
        for (int k = 0; k < AsymptoticSeries::kShifts; ++k) {
            const double tau = t - double(k) * delay_;
            if (tau < 0.0) continue;
            double part = 0.0, pw = 1.0, fact = 1.0;
            for (std::size_t m = 1; m < beta_.size(); ++m) {
                part += beta_[m][k] * pw / fact;
                pw *= tau;
                fact *= double(m);
            }
            total += part * std::exp(-b_ * tau);
        }
        return total;
    }

private:
    static double binom(int n, int k) {
        double r = 1.0;
        for (int i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
        return r;
    }

    double b_;
    double delay_;
    std::vector<AsymptoticSeries::Coeff> beta_;
};

struct DurbinReport {
    std::size_t terms = 0;
    double tail = 0.0;
    double abscissa = 0.0;
    double period = 0.0;
};

// Inverts K transforms sharing one Bromwich contour on a uniform grid. Each
// transform first has its asymptotic part removed (inverted exactly); the
// remainder is summed as a trapezoid rule along Re s = a, folded into M
// bins so one FFT yields all grid points.
template <std::size_t K, class F>
std::array<std::vector<double>, K> durbin_invert(F&& transforms, const std::array<SubtractionTerms, K>& sub,
                                                 const TimeGrid& grid, const DurbinSettings& cfg,
                                                 DurbinReport* report = nullptr) {
    const double t_max = grid.t_max();
    const double period_min = std::max(cfg.period_factor * t_max, 8.0 * grid.step);
    std::size_t M = 1;
    while (double(M) * grid.step < period_min) M <<= 1;
    M = std::max<std::size_t>(M, 2 * grid.count);
    const double P = double(M) * grid.step;
    const double a = cfg.pole_abscissa + cfg.shift / P;
    const double dw = 2.0 * std::numbers::pi / P;
    const double amplification = 2.0 * std::exp(a * t_max) / P;

    std::array<std::vector<cplx>, K> bins;
    for (auto& b : bins) b.assign(M, cplx(0.0));

    std::size_t done = 0;
    std::size_t target = M;
    double tail = 0.0;
    for (;;) {
        // bound on the truncation: summed remainder moduli over the last 10% of terms
        const std::size_t tail_begin = target - target / 10;
        double tail_sum = 0.0;
        for (std::size_t k = done; k < target; ++k) {
            const cplx s(a, dw * double(k));
            const auto vals = transforms(s);
            const std::size_t bin = k % M;
            const double w = (k == 0) ? 0.5 : 1.0;
            double m = 0.0;
            for (std::size_t i = 0; i < K; ++i) {
                const cplx rem = vals[i] - sub[i].laplace(s);
                bins[i][bin] += w * rem;
                m = std::max(m, std::abs(rem));
            }
            if (k >= tail_begin) tail_sum += m;
        }
        tail = tail_sum * amplification;
        done = target;
        if (tail <= cfg.tolerance) break;
        if (target >= cfg.max_terms)
            throw NumericalError(NumericalFailure::NonConvergence,
                                 "Durbin series tail " + std::to_string(tail) + " above tolerance after " +
                                     std::to_string(target) + " terms");
        target *= 2;
    }

    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::Unscaled);
    std::array<std::vector<double>, K> out;
    std::vector<cplx> time_domain;
    for (std::size_t i = 0; i < K; ++i) {
        fft.inv(time_domain, bins[i]);
        out[i].resize(grid.count);
        for (std::size_t j = 0; j < grid.count; ++j) {
            const double t = grid.time(j);
            out[i][j] = 2.0 * std::exp(a * t) / P * time_domain[j].real() + sub[i].time(t);
        }
    }
    if (report) *report = {done, tail, a, P};
    return out;
}

}  // namespace detail

/// chi, chi' and chi'' of one channel on the grid.
struct ChannelResponse {
    std::vector<double> chi;
    std::vector<double> chi_dot;
    std::vector<double> chi_ddot;

    Eigen::Matrix2d matrix(std::size_t i) const {
        Eigen::Matrix2d g;
        g << chi_dot[i], chi[i], chi_ddot[i], chi_dot[i];
        return g;
    }
};

/// Time-domain Green's function on a uniform grid, with the Laplace-domain
/// evaluator kept alongside.
class GreensFunction {
public:
    GreensFunction(const ModelParams& params, TimeGrid grid, DurbinSettings settings,
                   std::array<ChannelResponse, 2> channels, std::array<detail::DurbinReport, 2> reports)
        : params_(params), grid_(grid), settings_(settings), channels_(std::move(channels)),
          reports_(reports) {}

    const ModelParams& params() const { return params_; }
    const TimeGrid& grid() const { return grid_; }
    const DurbinSettings& durbin_settings() const { return settings_; }
    std::size_t size() const { return grid_.count; }
    double step() const { return grid_.step; }
    double time(std::size_t i) const { return grid_.time(i); }
    double t_max() const { return grid_.t_max(); }

    const ChannelResponse& channel(Channel ch) const { return channels_[std::size_t(ch)]; }
    const detail::DurbinReport& report(Channel ch) const { return reports_[std::size_t(ch)]; }

    /// G(t_i) as a 4x4 real matrix in (Q1, Q2, P1, P2).
    Eigen::Matrix4d matrix(std::size_t i) const {
        Eigen::Matrix4d g;
        detail::assemble_from_channels(channel(Channel::Symmetric).matrix(i),
                                       channel(Channel::Antisymmetric).matrix(i), g);
        return g;
    }

    Matrix4c laplace(cplx s) const { return greens_laplace(s, params_); }

    /// Grid index of time t; t must be a grid point.
    std::size_t index_of(double t) const {
        if (t < 0.0 || t > t_max() + 1e-9 * grid_.step)
            throw NumericalError(NumericalFailure::GridCoverage,
                                 "time " + std::to_string(t) + " outside the Green's function grid [0, " +
                                     std::to_string(t_max()) + "]");
        const double x = t / grid_.step;
        const auto i = std::size_t(std::llround(x));
        if (std::abs(x - double(i)) > 1e-6)
            throw NumericalError(NumericalFailure::GridCoverage,
                                 "time " + std::to_string(t) + " is not on the Green's function grid");
        return i;
    }

private:
    ModelParams params_;
    TimeGrid grid_;
    DurbinSettings settings_;
    std::array<ChannelResponse, 2> channels_;
    std::array<detail::DurbinReport, 2> reports_;
};

/// Inverts G(s) on `grid` with Durbin's Fourier-series formula.
inline GreensFunction greens_time(const TimeGrid& grid, const ModelParams& p, const DurbinSettings& cfg = {}) {
    if (grid.count < 2 || !(grid.step > 0.0))
        throw ConfigError("Green's function grid needs a positive step and at least two points");
    std::array<ChannelResponse, 2> channels;
    std::array<detail::DurbinReport, 2> reports;
    constexpr int kOrder = 8;
    for (Channel ch : kChannels) {
        const auto inv_det = detail::channel_inverse_determinant_series(ch, p, kOrder + 2);
        // chi = 1/D, chi' = s/D, chi'' = s^2/D - 1: shift the series by one and two orders
        detail::AsymptoticSeries s_chi = inv_det, s_dot = inv_det, s_ddot = inv_det;
        s_chi.c.resize(kOrder);
        s_dot.c.assign(kOrder - 1, {});
        s_ddot.c.assign(kOrder - 2, {});
        for (std::size_t n = 1; n < s_dot.c.size(); ++n) s_dot.c[n] = inv_det.c[n + 1];
        for (std::size_t n = 1; n < s_ddot.c.size(); ++n) s_ddot.c[n] = inv_det.c[n + 2];
        // kappa = omega0^2 + Gamma_ch(t=0) sets the high-frequency scale of 1/D
        const double kappa = std::abs(inv_det.c[4][0]);
        const double b = std::max({p.omega_cut, std::sqrt(kappa), 1.0});
        const std::array<detail::SubtractionTerms, 3> sub{detail::SubtractionTerms(s_chi, b),
                                                          detail::SubtractionTerms(s_dot, b),
                                                          detail::SubtractionTerms(s_ddot, b)};
        auto transforms = [&](cplx s) {
            const cplx D = channel_determinant(s, ch, p);
            const cplx inv = 1.0 / D;
            return std::array<cplx, 3>{inv, s * inv, (D - s * s) * (-inv)};
        };
        auto vals = detail::durbin_invert<3>(transforms, sub, grid, cfg, &reports[std::size_t(ch)]);
        auto& out = channels[std::size_t(ch)];
        out.chi = std::move(vals[0]);
        out.chi_dot = std::move(vals[1]);
        out.chi_ddot = std::move(vals[2]);
    }
    GreensFunction g(p, grid, cfg, std::move(channels), reports);
    const double dev = (g.matrix(0) - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff();
    if (dev > 1e-6)
        throw NumericalError(NumericalFailure::NonConvergence,
                             "inverted G(0) deviates from identity by " + std::to_string(dev));
    return g;
}

inline GreensFunction greens_time(double t_max, const ModelParams& p, const DurbinSettings& cfg = {}) {
    return greens_time(TimeGrid::covering(t_max, default_time_step(p)), p, cfg);
}

}  // namespace bathent
