#pragma once

// Covariance of the two oscillators: transient C(t) from a sampled Green's
// function and the steady state C_inf.
//
// Noise enters only through the frequency domain. Per channel the symmetrized
// force spectrum is w_ch(w) = (4 gamma/pi) w Omega^2/(Omega^2 + w^2)
// coth(w/2T) (1 +- cos w r), and with a(w, t) = int_0^t chi(u) e^{iwu} du,
// b = int_0^t chi'(u) e^{iwu} du the noise part of the channel covariance is
//
//     [[int w |a|^2, int w Re(a b*)], [int w Re(a b*), int w |b|^2]].

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bathent/entanglement.hpp"
#include "bathent/error.hpp"
#include "bathent/greens.hpp"
#include "bathent/kernels.hpp"
#include "bathent/model.hpp"
#include "bathent/quadrature.hpp"

namespace bathent {

struct CovarianceMatrix {
    Matrix4 entries = Matrix4::Identity();
    std::optional<double> time;  // empty for the asymptotic state

    bool is_asymptotic() const { return !time.has_value(); }
    double operator()(int i, int j) const { return entries(i, j); }
};

inline CovarianceMatrix ground_state_covariance() { return {Matrix4::Identity(), 0.0}; }

inline double log_negativity(const CovarianceMatrix& c) { return log_negativity(c.entries); }
inline std::array<double, 2> symplectic_eigenvalues(const CovarianceMatrix& c) {
    return symplectic_eigenvalues(c.entries);
}

/// w_ch(w): covariance weight of the channel noise.
inline double channel_noise_weight(double omega, Channel ch, const ModelParams& p) {
    const double base = NoiseSpectrum(p).covariance_weight(omega);
    // 1 +- cos(w r) as 2 cos^2 or 2 sin^2 of w r / 2
    const double half = 0.5 * omega * p.distance;
    const double f = ch == Channel::Symmetric ? std::cos(half) : std::sin(half);
    return base * 2.0 * f * f;
}

namespace detail {

inline void check_physical(const Matrix4& c, double threshold, const std::string& where) {
    const double nu = symplectic_eigenvalues(c)[0];
    if (nu < 1.0 - threshold)
        throw NumericalError(NumericalFailure::Unphysical,
                             where + ": smallest symplectic eigenvalue " + std::to_string(nu));
}

// Root of the channel determinant near s = i omega0 by complex secant steps.
// Returns nullopt when the iteration wanders off.
inline std::optional<cplx> channel_resonance(Channel ch, const ModelParams& p) {
    auto D = [&](cplx s) { return channel_determinant(s, ch, p); };
    cplx s0(0.0, ModelParams::omega0), s1(-1e-3, 0.999 * ModelParams::omega0);
    cplx f0 = D(s0), f1 = D(s1);
    for (int it = 0; it < 100; ++it) {
        if (f1 == f0) break;
        cplx s2 = s1 - f1 * (s1 - s0) / (f1 - f0);
        if (!(s2.real() > -0.5 * p.omega_cut) || std::abs(s2) > 10.0 + 2.0 * p.omega_cut) return std::nullopt;
        s0 = s1;
        f0 = f1;
        s1 = s2;
        f1 = D(s1);
        if (std::abs(s1 - s0) < 1e-15 * std::abs(s1)) return s1;
    }
    if (std::abs(f1) < 1e-10) return s1;
    return std::nullopt;
}

}  // namespace detail

struct ChannelMoments {
    double x = 0.0;      // int w |chi_hat|^2
    double p = 0.0;      // int w w^2 |chi_hat|^2
    double error = 0.0;  // quadrature + tail uncertainty
};

namespace detail {

// next order of the large-w expansion beyond omega_max, summed over X and P
inline double asymptotic_tail_bound(const ModelParams& p, double omega_max) {
    const double W = p.omega_cut;
    const double A = 4.0 * p.gamma * W * W / std::numbers::pi;
    const double kappa = 1.0 + 4.0 * p.gamma * W;
    return A * (kappa + W * W + 0.5) / std::pow(omega_max, 4);
}

}  // namespace detail

/// Steady-state variances of one channel: X = int w_ch/|D(iw)|^2 and
/// P = int w_ch w^2/|D(iw)|^2; the cross term vanishes.
inline ChannelMoments channel_asymptotic_moments(Channel ch, const ModelParams& p, double omega_max,
                                                 double tol) {
    const double W = p.omega_cut;
    const double r = p.distance;
    const double rel = std::max(1e-13, std::min(1e-10, 0.01 * tol));

    auto inv_abs2 = [&](double w) { return 1.0 / std::norm(channel_determinant(cplx(0.0, w), ch, p)); };
    auto fx = [&](double w) { return channel_noise_weight(w, ch, p) * inv_abs2(w); };
    auto fp = [&](double w) { return channel_noise_weight(w, ch, p) * w * w * inv_abs2(w); };

    // plain panels on [a, b], widths capped so cos(w r) and the cutoff stay resolved
    auto panels_between = [&](double a, double b, std::vector<double>& out) {
        auto cap = [&](double x) {
            double c = std::max(0.25, 0.5 * x);
            if (r > 0.0) c = std::min(c, std::numbers::pi / r);
            return c;
        };
        double x = a;
        out.push_back(x);
        while (b - x > 1.5 * cap(x)) {
            x += cap(x);
            out.push_back(x);
        }
        out.push_back(b);
    };

    std::vector<double> breaks{0.0, omega_max};
    if (p.temperature > 0.0)
        for (double v : {p.temperature, 4.0 * p.temperature})
            if (v < omega_max) breaks.push_back(v);

    // an underdamped pole near the real axis gets the window w_r +- w_r/2 mapped
    // through w = w_r + g tan(phi), which flattens the Lorentzian peak
    double ex = 0.0, ep = 0.0, x = 0.0, pm = 0.0;
    const auto root = detail::channel_resonance(ch, p);
    if (root && root->imag() > 1e-3 && -root->real() < 0.25 * root->imag()) {
        const double wr = root->imag();
        const double g = std::max(-root->real(), 1e-300);
        const double L = 0.5 * wr;
        // D(i w) in the offset delta = w - w_r; w0^2 - w_r^2 is a constant, so the
        // near-cancellation of w0^2 - w^2 at the peak costs no digits
        const double c0 = ModelParams::omega0 * ModelParams::omega0 - wr * wr;
        auto by_offset = [&](double delta, bool momentum) {
            const double w = wr + delta;
            const cplx s(0.0, w);
            const cplx D = c0 - (2.0 * wr + delta) * delta + s * channel_kernel_laplace(s, ch, p) / ModelParams::mass;
            return channel_noise_weight(w, ch, p) / std::norm(D) * (momentum ? w * w : 1.0);
        };
        // core |delta| < 1000 g through the tan map, the rest geometric in delta
        const double core = std::min(1000.0 * g, L);
        std::vector<double> phis{0.0}, deltas;
        for (double d = g; d < core; d *= 4.0) phis.push_back(std::atan(d / g));
        phis.push_back(std::atan(core / g));
        for (double d = core; d < L; d *= 4.0) deltas.push_back(d);
        deltas.push_back(L);
        const std::size_t half = phis.size();
        for (std::size_t i = 1; i < half; ++i) phis.push_back(-phis[i]);
        std::sort(phis.begin(), phis.end());
        for (bool momentum : {false, true}) {
            double e = 0.0, acc = 0.0;
            acc += quad::integrate_panels(
                [&](double phi) {
                    const double c = std::cos(phi);
                    return by_offset(g * std::tan(phi), momentum) * g / (c * c);
                },
                phis, rel, &e);
            double e_side = 0.0;
            acc += quad::integrate_panels([&](double d) { return by_offset(d, momentum); }, deltas, rel, &e_side);
            e += e_side;
            acc += quad::integrate_panels([&](double d) { return by_offset(-d, momentum); }, deltas, rel, &e_side);
            e += e_side;
            (momentum ? pm : x) += acc;
            (momentum ? ep : ex) += e;
        }
        breaks.push_back(wr - L);
        breaks.push_back(wr + L);
        std::sort(breaks.begin(), breaks.end());
        for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
            if (breaks[i] >= wr - L && breaks[i + 1] <= wr + L) continue;
            // consecutive runs repeat their joint; integrate_panels skips zero-width panels
            std::vector<double> run;
            panels_between(breaks[i], breaks[i + 1], run);
            double e3 = 0.0, e4 = 0.0;
            x += quad::integrate_panels(fx, run, rel, &e3);
            pm += quad::integrate_panels(fp, run, rel, &e4);
            ex += e3;
            ep += e4;
        }
    } else {
        std::sort(breaks.begin(), breaks.end());
        std::vector<double> panels;
        for (std::size_t i = 0; i + 1 < breaks.size(); ++i) panels_between(breaks[i], breaks[i + 1], panels);
        x = quad::integrate_panels(fx, panels, rel, &ex);
        pm = quad::integrate_panels(fp, panels, rel, &ep);
    }

    // beyond omega_max: w_ch w^2/|D|^2 -> A (1 + sigma cos w r)/w^3
    const double A = 4.0 * p.gamma * W * W / std::numbers::pi;
    const double sigma = channel_sign(ch);
    const double tail_p = A * (quad::cos_tail_3(0.0, omega_max) + sigma * quad::cos_tail_3(r, omega_max));
    const double tail_err = detail::asymptotic_tail_bound(p, omega_max);
    if (tail_err > tol)
        throw NumericalError(NumericalFailure::Truncation,
                             "frequency tail beyond omega_max=" + std::to_string(omega_max) +
                                 " uncertain by " + std::to_string(tail_err));
    return {x + A / (4.0 * std::pow(omega_max, 4)) * (1.0 + sigma), pm + tail_p, ex + ep + tail_err};
}

struct AsymptoticSettings {
    double omega_max_factor = 200.0;  // omega_max = factor * max(Omega, omega0)
    double tol = 1e-8;
};

/// Steady-state covariance. For r > 0 both channels are damped and forget the
/// initial state. At r = 0 the antisymmetric channel is free; the value returned
/// there is the r -> 0+ limit, in which that channel ends up thermal.
inline CovarianceMatrix covariance_asymptotic(const ModelParams& p, const AsymptoticSettings& cfg = {}) {
    if (!(p.gamma > 0.0))
        throw NumericalError(NumericalFailure::Domain, "asymptotic state needs gamma > 0");
    double omega_max = cfg.omega_max_factor * std::max(p.omega_cut, ModelParams::omega0);
    // strong damping pushes the tail up; move the cut until the bound fits
    while (detail::asymptotic_tail_bound(p, omega_max) > 0.5 * cfg.tol) omega_max *= 1.5;
    const ChannelMoments plus = channel_asymptotic_moments(Channel::Symmetric, p, omega_max, cfg.tol);
    ChannelMoments minus;
    if (p.distance > 0.0) {
        minus = channel_asymptotic_moments(Channel::Antisymmetric, p, omega_max, cfg.tol);
    } else {
        const double th = thermal_factor(ModelParams::omega0, p.temperature);
        minus = {th / ModelParams::omega0, th * ModelParams::omega0, 0.0};
    }
    Eigen::Matrix2d cp = Eigen::Matrix2d::Zero(), cm = Eigen::Matrix2d::Zero();
    cp(0, 0) = plus.x;
    cp(1, 1) = plus.p;
    cm(0, 0) = minus.x;
    cm(1, 1) = minus.p;
    CovarianceMatrix out;
    out.time.reset();
    detail::assemble_from_channels(cp, cm, out.entries);
    detail::check_physical(out.entries, 1e-4, "asymptotic covariance");
    return out;
}

// ---------------------------------------------------------------------------
// Transient covariance

struct TransientSettings {
    double omega_max_factor = 40.0;  // W = factor * max(Omega, omega0); analytic tail beyond
    int nodes_per_panel = 10;        // Gauss-Legendre order: 10, 15, 20 or 30
    double panel_width = 0.0;        // 0 selects 2 pi / t_max capped by the model scales
    double physical_tol = 1e-4;
};

namespace detail {

struct FrequencyGrid {
    std::vector<double> omega;
    std::vector<double> weight;  // quadrature weight, spectrum not included
    double upper = 0.0;
};

inline FrequencyGrid transient_frequency_grid(const ModelParams& p, double t_max, const TransientSettings& cfg) {
    const double upper = cfg.omega_max_factor * std::max(p.omega_cut, ModelParams::omega0);
    double width = cfg.panel_width > 0.0 ? cfg.panel_width : 2.0 * std::numbers::pi / std::max(t_max, 1e-12);
    width = std::min(width, 0.25 * std::max(p.omega_cut, ModelParams::omega0));
    if (p.distance > 0.0) width = std::min(width, 0.5 * std::numbers::pi / p.distance);
    std::vector<quad::Node> nodes;
    double a = 0.0;
    while (a < upper) {
        double w = width;
        if (a < 4.0 * ModelParams::omega0) w = std::min(w, 0.25);
        if (p.temperature > 0.0 && a < 4.0 * p.temperature) w = std::min(w, 0.5 * p.temperature);
        const double b = std::min(a + w, upper);
        quad::append_gauss_legendre(a, b, nodes, std::size_t(cfg.nodes_per_panel));
        a = b;
    }
    FrequencyGrid g;
    g.upper = upper;
    g.omega.reserve(nodes.size());
    g.weight.reserve(nodes.size());
    for (const auto& n : nodes) {
        g.omega.push_back(n.x);
        g.weight.push_back(n.w);
    }
    return g;
}

// int_W^inf of w_ch times the large-w forms of |a|^2, Re(a b*), |b|^2.
inline std::array<double, 3> channel_noise_tail(double t, double chi, double chi_dot, Channel ch,
                                                const ModelParams& p, double W) {
    const double A = 4.0 * p.gamma * p.omega_cut * p.omega_cut / std::numbers::pi;
    const double sigma = channel_sign(ch);
    const double r = p.distance;
    auto I3 = [W](double x) { return quad::cos_tail_3(x, W); };
    const double stat = I3(0.0) + sigma * I3(r);
    const double mov = I3(t) + 0.5 * sigma * (I3(t + r) + I3(std::abs(t - r)));
    return {A * chi * chi * stat, A * chi * (chi_dot * stat - mov), A * ((chi_dot * chi_dot + 1.0) * stat - 2.0 * chi_dot * mov)};
}

}  // namespace detail

/// C(t_i) for each requested grid index (ascending). Runs one cumulative
/// Filon sweep over the grid, so a whole trace costs the same as its last point.
inline std::vector<CovarianceMatrix> covariance_trace(const GreensFunction& g, const CovarianceMatrix& c0,
                                                      std::vector<std::size_t> indices,
                                                      const TransientSettings& cfg = {}) {
    if (indices.empty()) return {};
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    if (indices.back() >= g.size())
        throw NumericalError(NumericalFailure::GridCoverage,
                             "requested time " + std::to_string(double(indices.back()) * g.step()) +
                                 " beyond the Green's function grid (t_max=" + std::to_string(g.t_max()) + ")");
    if ((c0.entries - c0.entries.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw ConfigError("initial covariance is not symmetric");
    detail::check_physical(c0.entries, 1e-6, "initial covariance");

    const ModelParams& p = g.params();
    const double h = g.step();
    const double t_last = double(indices.back()) * h;
    const auto grid = detail::transient_frequency_grid(p, t_last, cfg);
    const std::size_t n = grid.omega.size();

    // spectral weights per channel, folded with the quadrature weight
    std::array<std::vector<double>, 2> wts;
    for (Channel ch : kChannels) {
        auto& v = wts[std::size_t(ch)];
        v.resize(n);
        for (std::size_t k = 0; k < n; ++k) v[k] = grid.weight[k] * channel_noise_weight(grid.omega[k], ch, p);
    }
    // Filon weights depend on theta = w h only
    std::vector<double> f0r(n), f0i(n), f1r(n), f1i(n), d0r(n), d0i(n), d1r(n), d1i(n), stepr(n), stepi(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double theta = grid.omega[k] * h;
        const auto fw = quad::hermite_filon_weights(theta);
        f0r[k] = fw.f0.real(), f0i[k] = fw.f0.imag();
        f1r[k] = fw.f1.real(), f1i[k] = fw.f1.imag();
        d0r[k] = h * fw.d0.real(), d0i[k] = h * fw.d0.imag();
        d1r[k] = h * fw.d1.real(), d1i[k] = h * fw.d1.imag();
        stepr[k] = std::cos(theta), stepi[k] = std::sin(theta);
    }
    std::vector<double> phr(n, 1.0), phi(n, 0.0);
    std::array<std::vector<double>, 2> ar, ai;
    for (auto* v : {&ar, &ai})
        for (auto& x : *v) x.assign(n, 0.0);

    std::vector<CovarianceMatrix> out;
    out.reserve(indices.size());
    std::size_t next = 0;
    const auto& cp = g.channel(Channel::Symmetric);
    const auto& cm = g.channel(Channel::Antisymmetric);

    for (std::size_t j = 0;; ++j) {
        if (j == 0 && indices[0] == 0) {
            // G(0) = I and no noise has accumulated: C(0) = C0 exactly, not up to inversion roundoff
            out.push_back({c0.entries, 0.0});
            ++next;
        }
        while (next < indices.size() && indices[next] == j) {
            const double t = double(j) * h;
            std::array<Eigen::Matrix2d, 2> noise;
            for (Channel ch : kChannels) {
                const auto& resp = ch == Channel::Symmetric ? cp : cm;
                const auto c = std::size_t(ch);
                const double chi = resp.chi[j];
                double sxx = 0.0, sxp = 0.0, spp = 0.0;
                const double* w = wts[c].data();
                const double* are = ar[c].data();
                const double* aim = ai[c].data();
                for (std::size_t k = 0; k < n; ++k) {
                    // b = chi(t) e^{iwt} - i w a
                    const double om = grid.omega[k];
                    const double br = chi * phr[k] + om * aim[k];
                    const double bi = chi * phi[k] - om * are[k];
                    sxx += w[k] * (are[k] * are[k] + aim[k] * aim[k]);
                    sxp += w[k] * (are[k] * br + aim[k] * bi);
                    spp += w[k] * (br * br + bi * bi);
                }
                const auto tail = detail::channel_noise_tail(t, chi, resp.chi_dot[j], ch, p, grid.upper);
                noise[c] << sxx + tail[0], sxp + tail[1], sxp + tail[1], spp + tail[2];
            }
            CovarianceMatrix cov;
            cov.time = t;
            detail::assemble_from_channels(noise[0], noise[1], cov.entries);
            const Matrix4 G = g.matrix(j);
            cov.entries += G * c0.entries * G.transpose();
            cov.entries = 0.5 * (cov.entries + cov.entries.transpose()).eval();
            detail::check_physical(cov.entries, cfg.physical_tol, "covariance at t=" + std::to_string(t));
            out.push_back(std::move(cov));
            ++next;
        }
        if (next == indices.size()) break;

        // advance a(w, t_j) -> a(w, t_{j+1}) on every node, both channels
        for (Channel ch : kChannels) {
            const auto& resp = ch == Channel::Symmetric ? cp : cm;
            const auto c = std::size_t(ch);
            const double x0 = resp.chi[j], x1 = resp.chi[j + 1];
            const double v0 = resp.chi_dot[j], v1 = resp.chi_dot[j + 1];
            double* are = ar[c].data();
            double* aim = ai[c].data();
            for (std::size_t k = 0; k < n; ++k) {
                const double fr = x0 * f0r[k] + x1 * f1r[k] + v0 * d0r[k] + v1 * d1r[k];
                const double fi = x0 * f0i[k] + x1 * f1i[k] + v0 * d0i[k] + v1 * d1i[k];
                are[k] += h * (phr[k] * fr - phi[k] * fi);
                aim[k] += h * (phr[k] * fi + phi[k] * fr);
            }
        }
        if ((j + 1) % 512 == 0) {
            const double t = double(j + 1) * h;
            for (std::size_t k = 0; k < n; ++k) {
                phr[k] = std::cos(grid.omega[k] * t);
                phi[k] = std::sin(grid.omega[k] * t);
            }
        } else {
            for (std::size_t k = 0; k < n; ++k) {
                const double r = phr[k] * stepr[k] - phi[k] * stepi[k];
                phi[k] = phr[k] * stepi[k] + phi[k] * stepr[k];
                phr[k] = r;
            }
        }
    }
    return out;
}

/// C(t) at a single grid time.
inline CovarianceMatrix covariance_time(double t, const CovarianceMatrix& c0, const GreensFunction& g,
                                        const TransientSettings& cfg = {}) {
    return covariance_trace(g, c0, {g.index_of(t)}, cfg).front();
}

}  // namespace bathent
