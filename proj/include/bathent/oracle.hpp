#pragma once

// Discretized-bath reference for the reduced dynamics. The bath is a finite
// set of oscillators on a linear frequency grid; with the counter-term the
// total Hamiltonian is quadratic and positive, so the Gaussian state evolves
// exactly.
//
// In the channel coordinates u_pm = (Q1 +- Q2)/sqrt(2) the bath splits into
// two independent sets (standing waves cos(kr/2) and sin(kr/2)), and each
// channel's potential is an arrowhead matrix
//
//     V = [[omega0^2 + sum c_k^2/omega_k^2, -c^T], [-c, diag(omega_k^2)]].
//
// Diagonalizing V once gives the propagator at every t in closed form. The
// eigenproblem is solved through its secular equation with every root held as
// an offset from the nearest pole, which keeps the small mode frequencies and
// the eigenvectors accurate at thousands of modes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <boost/math/tools/roots.hpp>

#include "bathent/covariance.hpp"
#include "bathent/error.hpp"
#include "bathent/greens.hpp"
#include "bathent/kernels.hpp"
#include "bathent/model.hpp"

namespace bathent {

struct DiscreteBath {
    ModelParams params;
    std::vector<double> omega;  // omega_k = (k - 1/2) d_omega
    std::vector<double> g;      // g_k^2 = 2 m_k omega_k J(omega_k) d_omega
    double k_spacing = 0.0;     // d_omega (= dk with c = 1)
    double mode_mass = 1.0;

    std::size_t n_modes() const { return omega.size(); }
    double omega_max() const { return k_spacing * double(omega.size()); }
    double recurrence_time() const { return 2.0 * std::numbers::pi / k_spacing; }

    /// Channel coupling: sqrt(2) g_k cos(kr/2) (symmetric) or sqrt(2) g_k sin(kr/2).
    double coupling(Channel ch, std::size_t k) const {
        const double phase = 0.5 * omega[k] / ModelParams::light_speed * params.distance;
        return std::numbers::sqrt2 * g[k] * (ch == Channel::Symmetric ? std::cos(phase) : std::sin(phase));
    }
};

/// Linear grid of n_modes oscillators up to omega_max_bath. `t_compare` is the
/// latest time the caller will compare at; it must stay below t_rec/2.
inline DiscreteBath build_bath(const ModelParams& params, std::size_t n_modes, double omega_max_bath,
                               double t_compare = 0.0) {
    if (n_modes < 100) throw ConfigError("oracle needs at least 100 bath modes");
    if (omega_max_bath < 20.0 * params.omega_cut)
        throw ConfigError("oracle bath must extend to at least 20 Omega");
    DiscreteBath bath;
    bath.params = params;
    bath.k_spacing = omega_max_bath / double(n_modes);
    if (t_compare >= 0.5 * bath.recurrence_time())
        throw ConfigError("comparison time " + std::to_string(t_compare) + " reaches half the recurrence time " +
                          std::to_string(0.5 * bath.recurrence_time()) + "; use more modes");
    bath.omega.resize(n_modes);
    bath.g.resize(n_modes);
    for (std::size_t k = 0; k < n_modes; ++k) {
        const double w = (double(k) + 0.5) * bath.k_spacing;
        bath.omega[k] = w;
        bath.g[k] = std::sqrt(2.0 * bath.mode_mass * w * spectral_density(w, params) * bath.k_spacing);
    }
    return bath;
}

inline Eigen::MatrixXd channel_potential(const DiscreteBath& bath, Channel ch, bool counter_term) {
    const std::size_t n = bath.n_modes();
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(Eigen::Index(n + 1), Eigen::Index(n + 1));
    double shift = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double c = bath.coupling(ch, k);
        const double w = bath.omega[k];
        const auto i = Eigen::Index(k + 1);
        V(i, i) = w * w;
        V(0, i) = V(i, 0) = -c / std::sqrt(bath.mode_mass);
        shift += c * c / (bath.mode_mass * w * w);
    }
    V(0, 0) = ModelParams::omega0 * ModelParams::omega0 + (counter_term ? shift : 0.0);
    return V;
}

/// Normal modes of one channel that touch the system coordinate. Eigenvector j
/// has system component u0(j) and bath components u0(j) c_m / (d_m - lambda_j),
/// with d_m - lambda_j held as (d_m - d_pole(j)) - offset(j) so it never cancels.
/// Bath oscillators with c_m = 0 are their own normal modes and are left out.
struct ChannelModes {
    Eigen::VectorXd coupling;  // c_m
    Eigen::VectorXd pole2;     // d_m = omega_m^2
    Eigen::VectorXd freq;      // sqrt(lambda_j)
    Eigen::VectorXd u0;
    std::vector<Eigen::Index> pole;
    Eigen::VectorXd offset;
    double orthogonality_error = 0.0;

    Eigen::Index size() const { return freq.size(); }
    double gap(Eigen::Index m, Eigen::Index j) const {
        return (pole2(m) - pole2(pole[std::size_t(j)])) - offset(j);
    }
    double component(Eigen::Index m, Eigen::Index j) const { return u0(j) * coupling(m) / gap(m, j); }

    /// Rows: system, then bath oscillators; columns: coupled normal modes.
    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd U(pole2.size() + 1, size());
        for (Eigen::Index j = 0; j < size(); ++j) {
            U(0, j) = u0(j);
            for (Eigen::Index m = 0; m < pole2.size(); ++m) U(m + 1, j) = component(m, j);
        }
        return U;
    }
};

namespace detail {

/// Coupled spectrum of [[a, -c^T], [-c, diag(d)]] with d strictly increasing,
/// from the secular equation a - lambda = sum c_k^2 / (d_k - lambda).
inline void arrowhead_modes(double a, ChannelModes& m) {
    const auto& c = m.coupling;
    const auto& d = m.pole2;
    const Eigen::Index n = d.size();
    const double scale = std::max(std::abs(a), d(n - 1));
    std::vector<Eigen::Index> live;
    for (Eigen::Index k = 0; k < n; ++k)
        if (std::abs(c(k)) > 1e-14 * std::sqrt(scale)) live.push_back(k);
    const auto nl = Eigen::Index(live.size());
    m.pole.clear();
    m.offset.resize(nl + 1);
    m.freq.resize(nl + 1);
    m.u0.resize(nl + 1);
    if (nl == 0) {
        // the pole index is irrelevant here, every component carries c_m = 0
        m.pole.push_back(0);
        m.offset(0) = a - d(0);
        m.freq(0) = std::sqrt(a);
        m.u0(0) = 1.0;
        if (a <= 0.0)
            throw NumericalError(NumericalFailure::Unstable, "discretized Hamiltonian is not positive");
        return;
    }
    Eigen::ArrayXd cl(nl), dl(nl);
    for (Eigen::Index i = 0; i < nl; ++i) {
        cl(i) = c(live[std::size_t(i)]);
        dl(i) = d(live[std::size_t(i)]);
    }
    const Eigen::ArrayXd c2 = cl.square();
    double lo = a - cl.abs().sum(), hi = a + cl.abs().sum();
    for (Eigen::Index i = 0; i < nl; ++i) {
        lo = std::min(lo, dl(i) - std::abs(cl(i)));
        hi = std::max(hi, dl(i) + std::abs(cl(i)));
    }
    // f(d_k + mu), decreasing in mu between poles
    auto secular = [&](Eigen::Index k, double mu) { return a - dl(k) - mu - (c2 / ((dl - dl(k)) - mu)).sum(); };
    auto solve = [&](Eigen::Index k, double mu_lo, double mu_hi) {
        const double f_lo = secular(k, mu_lo), f_hi = secular(k, mu_hi);
        if (f_lo <= 0.0) return mu_lo;
        if (f_hi >= 0.0) return mu_hi;
        boost::uintmax_t iters = 200;
        const auto r = boost::math::tools::toms748_solve([&](double mu) { return secular(k, mu); }, mu_lo, mu_hi,
                                                         f_lo, f_hi, boost::math::tools::eps_tolerance<double>(50),
                                                         iters);
        return 0.5 * (r.first + r.second);
    };
    const double tiny = 1e-300;
    std::vector<std::pair<Eigen::Index, double>> roots;  // (pole among live, offset)
    roots.reserve(std::size_t(nl + 1));
    roots.emplace_back(0, solve(0, std::min(lo - dl(0), -tiny), -tiny));
    for (Eigen::Index k = 0; k + 1 < nl; ++k) {
        const double half = 0.5 * (dl(k + 1) - dl(k));
        if (secular(k, half) <= 0.0)
            roots.emplace_back(k, solve(k, tiny, half));
        else
            roots.emplace_back(k + 1, solve(k + 1, -half, -tiny));
    }
    roots.emplace_back(nl - 1, solve(nl - 1, tiny, std::max(hi - dl(nl - 1), 2.0 * tiny)));

    for (Eigen::Index j = 0; j <= nl; ++j) {
        const auto [k, mu] = roots[std::size_t(j)];
        const double lambda = dl(k) + mu;
        if (lambda <= 0.0)
            throw NumericalError(NumericalFailure::Unstable,
                                 "discretized Hamiltonian is not positive (lowest mode frequency^2 = " +
                                     std::to_string(lambda) + ")");
        const Eigen::ArrayXd v = cl / ((dl - dl(k)) - mu);
        m.pole.push_back(live[std::size_t(k)]);
        m.offset(j) = mu;
        m.freq(j) = std::sqrt(lambda);
        m.u0(j) = 1.0 / std::sqrt(1.0 + v.square().sum());
    }
}

}  // namespace detail

inline ChannelModes channel_normal_modes(const DiscreteBath& bath, Channel ch, bool counter_term = true) {
    const auto n = Eigen::Index(bath.n_modes());
    ChannelModes m;
    m.coupling.resize(n);
    m.pole2.resize(n);
    double shift = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double w = bath.omega[std::size_t(k)];
        m.coupling(k) = bath.coupling(ch, std::size_t(k)) / std::sqrt(bath.mode_mass);
        m.pole2(k) = w * w;
        shift += m.coupling(k) * m.coupling(k) / (w * w);
    }
    detail::arrowhead_modes(ModelParams::omega0 * ModelParams::omega0 + (counter_term ? shift : 0.0), m);

    // orthonormal columns <=> symplectic phase-space propagator; probe U^T U v = v
    double err = std::abs(m.u0.squaredNorm() - 1.0);
    Eigen::VectorXd v(m.size());
    for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = std::cos(0.7 * double(j) + 0.3);
    Eigen::VectorXd w(n + 1);
    w(0) = m.u0.dot(v);
    for (Eigen::Index r = 0; r < n; ++r) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < v.size(); ++j) acc += m.component(r, j) * v(j);
        w(r + 1) = acc;
    }
    for (Eigen::Index j = 0; j < v.size(); ++j) {
        double acc = m.u0(j) * w(0);
        for (Eigen::Index r = 0; r < n; ++r) acc += m.component(r, j) * w(r + 1);
        err = std::max(err, std::abs(acc - v(j)));
    }
    m.orthogonality_error = err;
    if (err > 1e-8)
        throw NumericalError(NumericalFailure::Symplecticity,
                             "normal-mode basis not orthogonal to 1e-8 (" + std::to_string(err) + ")");
    return m;
}

/// Reference solver built from a discrete bath. Both channels are diagonalized
/// up front; evaluation at any t is then a sum over normal modes.
class BathOracle {
public:
    explicit BathOracle(DiscreteBath bath, bool counter_term = true, bool tail_correction = true)
        : bath_(std::move(bath)), counter_term_(counter_term), tail_correction_(tail_correction) {
        for (Channel ch : kChannels) modes_[std::size_t(ch)] = channel_normal_modes(bath_, ch, counter_term_);
    }

    const DiscreteBath& bath() const { return bath_; }
    const ChannelModes& modes(Channel ch) const { return modes_[std::size_t(ch)]; }
    bool counter_term() const { return counter_term_; }

    /// System block of the mean-value propagator, (Q1, Q2, P1, P2) <- same.
    Eigen::Matrix4d mean_propagator(double t) const {
        std::array<Eigen::Matrix2d, 2> g;
        for (Channel ch : kChannels) {
            const auto& m = modes(ch);
            const Eigen::ArrayXd u2 = m.u0.array().square();
            const Eigen::ArrayXd wt = m.freq.array() * t;
            const double a = (u2 * wt.cos()).sum();
            const double b = (u2 * wt.sin() / m.freq.array()).sum();
            const double adot = -(u2 * m.freq.array() * wt.sin()).sum();
            g[std::size_t(ch)] << a, b, adot, a;
        }
        Eigen::Matrix4d out;
        detail::assemble_from_channels(g[0], g[1], out);
        return out;
    }

    /// Reduced covariance of the two oscillators at each time; the bath starts
    /// thermal at the model temperature and uncorrelated with the system.
    std::vector<CovarianceMatrix> reduced_trace(const std::vector<double>& times, const CovarianceMatrix& c0) const {
        std::vector<CovarianceMatrix> out(times.size());
        const auto n = Eigen::Index(bath_.n_modes());
        Eigen::ArrayXd sq(n), sp(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            const double w = bath_.omega[std::size_t(k)];
            const double th = thermal_factor(w, bath_.params.temperature);
            sq(k) = th / (bath_.mode_mass * w);
            sp(k) = th * bath_.mode_mass * w;
        }
        constexpr Eigen::Index kChunk = 64, kRows = 256;
        for (std::size_t start = 0; start < times.size(); start += std::size_t(kChunk)) {
            const auto nt = Eigen::Index(std::min<std::size_t>(std::size_t(kChunk), times.size() - start));
            std::array<std::vector<Eigen::Matrix2d>, 2> sys, noise;
            for (Channel ch : kChannels) {
                const auto& m = modes(ch);
                const Eigen::Index nm = m.size();
                // x_sys(t) = sum_m A_m x_m(0) + B_m p_m(0); p_sys(t) = sum_m Ad_m x_m(0) + A_m p_m(0)
                Eigen::MatrixXd Pc(nm, nt), Ps(nm, nt), Pd(nm, nt);
                for (Eigen::Index i = 0; i < nt; ++i) {
                    const double t = times[start + std::size_t(i)];
                    for (Eigen::Index j = 0; j < nm; ++j) {
                        const double w = m.freq(j), u = m.u0(j) * m.u0(j);
                        Pc(j, i) = u * std::cos(w * t);
                        Ps(j, i) = u * std::sin(w * t) / w;
                        Pd(j, i) = -u * w * std::sin(w * t);
                    }
                }
                Eigen::ArrayXd xx = Eigen::ArrayXd::Zero(nt), xp = xx, pp = xx;
                Eigen::MatrixXd inv(kRows, nm);
                for (Eigen::Index r0 = 0; r0 < n; r0 += kRows) {
                    const Eigen::Index rows = std::min(kRows, n - r0);
                    for (Eigen::Index j = 0; j < nm; ++j)
                        for (Eigen::Index r = 0; r < rows; ++r) inv(r, j) = 1.0 / m.gap(r0 + r, j);
                    const auto blk = inv.topRows(rows);
                    const Eigen::MatrixXd A = blk * Pc, B = blk * Ps, Ad = blk * Pd;
                    for (Eigen::Index r = 0; r < rows; ++r) {
                        const double c2 = m.coupling(r0 + r) * m.coupling(r0 + r);
                        const double wq = c2 * sq(r0 + r), wp = c2 * sp(r0 + r);
                        const auto a = A.row(r).array(), b = B.row(r).array(), ad = Ad.row(r).array();
                        xx += wq * a.square() + wp * b.square();
                        xp += wq * a * ad + wp * b * a;
                        pp += wq * ad.square() + wp * a.square();
                    }
                }
                auto& s = sys[std::size_t(ch)];
                auto& nz = noise[std::size_t(ch)];
                s.resize(std::size_t(nt));
                nz.resize(std::size_t(nt));
                for (Eigen::Index i = 0; i < nt; ++i) {
                    const double a0 = Pc.col(i).sum(), b0 = Ps.col(i).sum(), d0 = Pd.col(i).sum();
                    s[std::size_t(i)] << a0, b0, d0, a0;
                    nz[std::size_t(i)] << xx(i), xp(i), xp(i), pp(i);
                    if (tail_correction_) {
                        // continuum above the last mode, which the 1/omega^2 falloff makes non-negligible
                        const auto tail = detail::channel_noise_tail(times[start + std::size_t(i)], b0, a0, ch,
                                                                     bath_.params, bath_.omega_max());
                        nz[std::size_t(i)] += Eigen::Matrix2d{{tail[0], tail[1]}, {tail[1], tail[2]}};
                    }
                }
            }
            for (Eigen::Index i = 0; i < nt; ++i) {
                Eigen::Matrix4d G, N;
                detail::assemble_from_channels(sys[0][std::size_t(i)], sys[1][std::size_t(i)], G);
                detail::assemble_from_channels(noise[0][std::size_t(i)], noise[1][std::size_t(i)], N);
                CovarianceMatrix& c = out[start + std::size_t(i)];
                c.time = times[start + std::size_t(i)];
                c.entries = G * c0.entries * G.transpose() + N;
                c.entries = 0.5 * (c.entries + c.entries.transpose()).eval();
            }
        }
        return out;
    }

    CovarianceMatrix reduced_covariance(double t, const CovarianceMatrix& c0) const {
        return reduced_trace({t}, c0).front();
    }

private:
    DiscreteBath bath_;
    bool counter_term_;
    bool tail_correction_;
    std::array<ChannelModes, 2> modes_;
};

// ---------------------------------------------------------------------------
// Full phase-space form, for small baths: explicit Hamiltonian matrix and
// matrix-exponential propagator. Ordering: (Q1, Q2, P1, P2), then
// (q_k, p_k) of the symmetric channel, then those of the antisymmetric one.

class GlobalGaussianState {
public:
    GlobalGaussianState(const DiscreteBath& bath, const CovarianceMatrix& c0, bool counter_term = true)
        : n_(bath.n_modes()) {
        const Eigen::Index dim = Eigen::Index(4 + 4 * n_);
        H_ = Eigen::MatrixXd::Zero(dim, dim);
        sigma_ = Eigen::MatrixXd::Zero(dim, dim);
        cov_ = Eigen::MatrixXd::Zero(dim, dim);
        const double s = 1.0 / std::numbers::sqrt2;
        // system: H = P^2/2m + m omega0^2 Q^2/2 (+ counter-term)
        for (int i = 0; i < 2; ++i) {
            H_(i, i) = ModelParams::mass * ModelParams::omega0 * ModelParams::omega0;
            H_(2 + i, 2 + i) = 1.0 / ModelParams::mass;
            sigma_(i, 2 + i) = 1.0;
            sigma_(2 + i, i) = -1.0;
        }
        // u_pm = s (Q1 +- Q2)
        const std::array<Eigen::Vector2d, 2> proj{Eigen::Vector2d(s, s), Eigen::Vector2d(s, -s)};
        for (Channel ch : kChannels) {
            const auto c = std::size_t(ch);
            const Eigen::Index base = Eigen::Index(4 + 2 * n_ * c);
            double shift = 0.0;
            for (std::size_t k = 0; k < n_; ++k) {
                const Eigen::Index q = base + Eigen::Index(k), p = q + Eigen::Index(n_);
                const double w = bath.omega[k];
                const double ck = bath.coupling(ch, k);
                H_(q, q) = bath.mode_mass * w * w;
                H_(p, p) = 1.0 / bath.mode_mass;
                sigma_(q, p) = 1.0;
                sigma_(p, q) = -1.0;
                for (int i = 0; i < 2; ++i) {
                    H_(i, q) -= ck * proj[c](i);
                    H_(q, i) -= ck * proj[c](i);
                }
                shift += ck * ck / (bath.mode_mass * w * w);
                const double th = thermal_factor(w, bath.params.temperature);
                cov_(q, q) = th / (bath.mode_mass * w);
                cov_(p, p) = th * bath.mode_mass * w;
            }
            if (counter_term) H_.topLeftCorner<2, 2>() += shift * proj[c] * proj[c].transpose();
        }
        cov_.topLeftCorner<4, 4>() = c0.entries;
    }

    const Eigen::MatrixXd& hamiltonian_matrix() const { return H_; }
    const Eigen::MatrixXd& covariance() const { return cov_; }
    const Eigen::MatrixXd& symplectic_form() const { return sigma_; }

    /// exp(t Sigma H); throws when the result drifts from the symplectic group.
    Eigen::MatrixXd propagator(double t) const {
        const Eigen::MatrixXd S = (t * sigma_ * H_).exp();
        const double err = (S * sigma_ * S.transpose() - sigma_).cwiseAbs().maxCoeff();
        if (err > 1e-8)
            throw NumericalError(NumericalFailure::Symplecticity,
                                 "propagator violates symplecticity by " + std::to_string(err));
        return S;
    }

    GlobalGaussianState evolve(double t) const {
        GlobalGaussianState out = *this;
        const Eigen::MatrixXd S = propagator(t);
        out.cov_ = S * cov_ * S.transpose();
        return out;
    }

    double energy() const { return 0.25 * (H_.cwiseProduct(cov_)).sum(); }

    CovarianceMatrix reduce_to_system() const {
        CovarianceMatrix c;
        c.entries = cov_.topLeftCorner<4, 4>();
        // (m / hbar omega0)^{1/2} on positions and its inverse on momenta are 1 in natural units
        return c;
    }

private:
    std::size_t n_;
    Eigen::MatrixXd H_;
    Eigen::MatrixXd sigma_;
    Eigen::MatrixXd cov_;
};

}  // namespace bathent
