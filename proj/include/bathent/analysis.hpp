#pragma once

// Post-processing on top of the covariance pipeline: E(t) traces and their
// peaks, the short-time expansion, and the critical distances d0 and d1.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bathent/covariance.hpp"
#include "bathent/entanglement.hpp"
#include "bathent/error.hpp"
#include "bathent/greens.hpp"
#include "bathent/model.hpp"

namespace bathent {

/// E below this is "no entanglement".
inline constexpr double kZeroEntanglement = 1e-8;

/// Runs f(0..n-1) on up to `jobs` threads; results keep their index order.
/// The first exception thrown by any job is rethrown after all threads join.
template <class F>
auto parallel_map(std::size_t n, unsigned jobs, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
    using R = decltype(f(std::size_t{}));
    std::vector<std::optional<R>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                slots[i].emplace(f(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, unsigned(std::max<std::size_t>(n, 1))));
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<R> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---------------------------------------------------------------------------
// Traces and peaks

struct Peak {
    double time = 0.0;    // refined by a parabola through the three grid points
    double height = 0.0;
    double onset = 0.0;   // last zero or local minimum before the peak
    std::size_t index = 0;
};

/// Local maxima above `threshold`. Flat tops count once, at their first point.
inline std::vector<Peak> find_peaks(const std::vector<double>& t, const std::vector<double>& e,
                                    double threshold = kZeroEntanglement) {
    std::vector<Peak> peaks;
    const std::size_t n = std::min(t.size(), e.size());
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(e[i] > threshold) || !(e[i] > e[i - 1])) continue;
        std::size_t k = i;
        while (k + 1 < n && e[k + 1] == e[i]) ++k;
        if (k + 1 >= n || !(e[k + 1] < e[i])) continue;
        Peak pk;
        pk.index = i;
        pk.time = t[i];
        pk.height = e[i];
        if (k == i) {
            const double em = e[i - 1], ep = e[i + 1];
            const double curv = em - 2.0 * e[i] + ep;
            if (curv < 0.0) {
                const double delta = std::clamp(0.5 * (em - ep) / curv, -1.0, 1.0);
                const double h = delta < 0.0 ? t[i] - t[i - 1] : t[i + 1] - t[i];
                pk.time = t[i] + delta * h;
                pk.height = e[i] - 0.25 * (em - ep) * delta;
            }
        }
        std::size_t j = i;
        while (j > 0 && e[j] > threshold && e[j - 1] <= e[j]) --j;
        pk.onset = t[j];
        peaks.push_back(pk);
        i = k;
    }
    return peaks;
}

struct EntanglementTrace {
    std::vector<double> times;
    std::vector<double> values;
    ModelParams params;
    std::vector<Peak> peaks;
    std::optional<double> asymptote;       // E of the steady state; absent when gamma == 0
    double min_symplectic = 0.0;           // smallest symplectic eigenvalue over the trace

    /// First peak whose onset lies beyond 0.8 r/c: entanglement carried across by exchanged bosons.
    std::optional<Peak> second_peak() const {
        const double cut = 0.8 * params.distance / ModelParams::light_speed;
        for (const auto& p : peaks)
            if (p.onset > cut) return p;
        return std::nullopt;
    }

    /// True when E comes back above zero after the initial transient has died.
    /// A trace that never returns to zero counts as recovered.
    bool recovers(double threshold = kZeroEntanglement) const {
        std::size_t i = 0;
        const std::size_t n = values.size();
        while (i < n && !(values[i] > threshold)) ++i;
        while (i < n && values[i] > threshold) ++i;
        if (i == n) return i > 0 && values[n - 1] > threshold;
        for (; i < n; ++i)
            if (values[i] > threshold) return true;
        return false;
    }

    double max_value() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }
};

struct TraceSettings {
    TransientSettings transient{};
    DurbinSettings durbin{};
    bool with_asymptote = true;
};

/// Green's function step that divides dt and respects the default resolution.
inline double trace_step(const ModelParams& p, double dt) {
    const double h = default_time_step(p);
    return dt / std::ceil(dt / h * (1.0 - 1e-12));
}

/// E(t) from the ground state on t = 0, dt, ..., t_max.
inline EntanglementTrace trace(const ModelParams& p, double t_max, double dt, const TraceSettings& cfg = {}) {
    if (!(t_max > 0.0) || !(dt > 0.0) || dt > t_max) throw ConfigError("trace needs 0 < dt <= t_max");
    const double h = trace_step(p, dt);
    const auto stride = std::size_t(std::llround(dt / h));
    const auto n_out = std::size_t(std::llround(t_max / dt));
    const GreensFunction g = greens_time(TimeGrid{h, n_out * stride + 1}, p, cfg.durbin);
    std::vector<std::size_t> idx(n_out + 1);
    for (std::size_t i = 0; i <= n_out; ++i) idx[i] = i * stride;
    const auto cov = covariance_trace(g, ground_state_covariance(), idx, cfg.transient);

    EntanglementTrace out;
    out.params = p;
    out.min_symplectic = std::numeric_limits<double>::infinity();
    for (const auto& c : cov) {
        out.times.push_back(*c.time);
        out.values.push_back(log_negativity(c));
        out.min_symplectic = std::min(out.min_symplectic, symplectic_eigenvalues(c)[0]);
    }
    out.peaks = find_peaks(out.times, out.values);
    if (cfg.with_asymptote && p.gamma > 0.0) out.asymptote = log_negativity(covariance_asymptotic(p));
    return out;
}

// ---------------------------------------------------------------------------
// Short times

/// Two-term expansion of E at T = 0 for 0 < Omega t << 1, clamped at zero.
inline double short_time_expansion(double t, const ModelParams& p) {
    if (p.temperature > 0.0) throw ConfigError("short-time expansion holds at zero temperature only");
    if (!(t > 0.0)) throw ConfigError("short-time expansion needs t > 0");
    const double x = p.omega_cut * t;
    const double alpha = 0.2937 - std::log(x) / std::numbers::pi;
    const double e = 4.0 / std::numbers::ln2 * p.gamma / ModelParams::omega0 *
                     (std::exp(-p.distance * p.omega_cut / ModelParams::light_speed) * x - alpha * x * x);
    return std::max(0.0, e);
}

/// Leading coefficient dE/dt at t -> 0 of the expansion above.
inline double short_time_slope(const ModelParams& p) {
    return 4.0 / std::numbers::ln2 * p.gamma / ModelParams::omega0 * p.omega_cut *
           std::exp(-p.distance * p.omega_cut / ModelParams::light_speed);
}

struct InitialSlope {
    double fitted = 0.0;    // a in E = a t + t^2 (b + c ln t)
    double secant = 0.0;    // (E(t2) - E(t1)) / (t2 - t1)
    double residual = 0.0;  // rms misfit of the three-term model
    std::vector<double> times, values;
};

/// Measures dE/dt at small times on Omega t in [x_lo, x_hi]. The curvature of
/// E carries a t^2 ln t term, so a plain secant is biased by several percent
/// when e^{-r Omega} is small; the three-term fit removes it.
inline InitialSlope measure_initial_slope(const ModelParams& p, double x_lo = 1e-3, double x_hi = 1e-2,
                                          std::size_t steps_per_lo = 10, const TransientSettings& cfg = {}) {
    if (!(x_lo > 0.0) || !(x_hi > x_lo)) throw ConfigError("slope window needs 0 < x_lo < x_hi");
    const double t_lo = x_lo / p.omega_cut, t_hi = x_hi / p.omega_cut;
    const double h = t_lo / double(steps_per_lo);
    const auto last = std::size_t(std::llround(t_hi / h));
    const GreensFunction g = greens_time(TimeGrid{h, last + 1}, p);
    std::vector<std::size_t> idx;
    for (std::size_t i = steps_per_lo; i <= last; ++i) idx.push_back(i);
    const auto cov = covariance_trace(g, ground_state_covariance(), idx, cfg);
    InitialSlope out;
    for (const auto& c : cov) {
        out.times.push_back(*c.time);
        out.values.push_back(log_negativity(c));
    }
    const auto n = Eigen::Index(out.times.size());
    Eigen::MatrixXd M(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = out.times[std::size_t(i)];
        M.row(i) << t, t * t, t * t * std::log(t);
        y(i) = out.values[std::size_t(i)];
    }
    const Eigen::VectorXd coef = M.colPivHouseholderQr().solve(y);
    out.fitted = coef(0);
    out.residual = std::sqrt((M * coef - y).squaredNorm() / double(n));
    out.secant = (out.values.back() - out.values.front()) / (out.times.back() - out.times.front());
    return out;
}

// ---------------------------------------------------------------------------
// Critical distances

struct CriticalDistanceResult {
    std::optional<double> d0;
    std::optional<double> d1;
    std::optional<double> slope_a;
    std::pair<double, double> bracket{0.0, 0.0};
    std::size_t evaluations = 0;
    std::vector<std::pair<double, Peak>> second_peaks;  // (r, peak) for every probe that had one
};

namespace detail {

// bisection on a boolean indicator that is true at lo and false at hi
template <class F>
std::pair<double, double> bisect_boundary(double lo, double hi, double tol, F&& positive, std::size_t& evals) {
    if (!(lo < hi)) throw ConfigError("bracket needs lo < hi");
    if (!(tol > 0.0)) throw ConfigError("bisection tolerance must be positive");
    ++evals;
    if (!positive(lo))
        throw NumericalError(NumericalFailure::Bracket, "indicator is zero at the low end r=" + std::to_string(lo));
    ++evals;
    if (positive(hi))
        throw NumericalError(NumericalFailure::Bracket,
                             "indicator is still positive at the high end r=" + std::to_string(hi));
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        ++evals;
        (positive(mid) ? lo : hi) = mid;
    }
    return {lo, hi};
}

}  // namespace detail

inline double asymptotic_negativity(const ModelParams& p, const AsymptoticSettings& cfg = {}) {
    return log_negativity(covariance_asymptotic(p, cfg));
}

/// Distance where the steady-state E vanishes; the distance in `p` is ignored.
inline CriticalDistanceResult find_d0(const ModelParams& p, double r_lo = 0.0, double r_hi = 1.0,
                                      double tol = 1e-3, const AsymptoticSettings& cfg = {}) {
    CriticalDistanceResult res;
    res.bracket = detail::bisect_boundary(
        r_lo, r_hi, tol,
        [&](double r) { return asymptotic_negativity(p.with_distance(r), cfg) > kZeroEntanglement; },
        res.evaluations);
    res.d0 = 0.5 * (res.bracket.first + res.bracket.second);
    return res;
}

/// Height of the exchange (second) peak at distance r, 0 when there is none.
inline std::optional<Peak> second_peak(const ModelParams& p, const TraceSettings& cfg = {}) {
    const double r = p.distance;
    const double tau = 1.0 / p.omega_cut;
    const double t_max = 2.0 * r / ModelParams::light_speed + 4.0 * tau;
    const double dt = std::min(r / ModelParams::light_speed, tau) / 100.0;
    TraceSettings local = cfg;
    local.with_asymptote = false;
    return trace(p, t_max, dt, local).second_peak();
}

/// Distance where the second peak vanishes. The two peaks cannot be told
/// apart below r Omega / c = 1, and up to about 1.5 they are still merged,
/// so the default bracket starts at 1.5 c / Omega.
inline CriticalDistanceResult find_d1(const ModelParams& p, std::optional<double> r_lo = std::nullopt,
                                      std::optional<double> r_hi = std::nullopt, double tol = 1e-3,
                                      const TraceSettings& cfg = {}) {
    const double lo = r_lo.value_or(1.5 * ModelParams::light_speed / p.omega_cut);
    const double hi = r_hi.value_or(10.0 * ModelParams::light_speed / p.omega_cut);
    if (lo * p.omega_cut / ModelParams::light_speed < 1.0 - 1e-12)
        throw NumericalError(NumericalFailure::AmbiguousPeak,
                             "first and second peak are not resolvable for r Omega / c < 1 (r=" + std::to_string(lo) +
                                 ")");
    CriticalDistanceResult res;
    res.bracket = detail::bisect_boundary(
        lo, hi, tol,
        [&](double r) {
            const auto pk = second_peak(p.with_distance(r), cfg);
            if (pk && pk->height > kZeroEntanglement) {
                res.second_peaks.emplace_back(r, *pk);
                return true;
            }
            return false;
        },
        res.evaluations);
    res.d1 = 0.5 * (res.bracket.first + res.bracket.second);
    return res;
}

/// Smallest distance at which E(t) no longer recovers after the transient
/// within t <= t_max.
inline CriticalDistanceResult find_recovery_boundary(const ModelParams& p, double r_lo, double r_hi,
                                                     double t_max = 30.0, double dt = 0.05, double tol = 1e-3,
                                                     const TraceSettings& cfg = {}) {
    TraceSettings local = cfg;
    local.with_asymptote = false;
    CriticalDistanceResult res;
    res.bracket = detail::bisect_boundary(
        r_lo, r_hi, tol, [&](double r) { return trace(p.with_distance(r), t_max, dt, local).recovers(); },
        res.evaluations);
    return res;
}

// ---------------------------------------------------------------------------
// d0 ~ a c / Omega

struct SlopeFit {
    double slope = 0.0;
    double residual = 0.0;  // rms misfit
    bool ill_conditioned = false;
    std::vector<std::pair<double, double>> used;  // (1/Omega, d0) samples in the final fit
    std::vector<std::pair<double, double>> dropped;
};

namespace detail {

inline SlopeFit fit_through_origin(std::vector<std::pair<double, double>> pts) {
    SlopeFit f;
    double sxy = 0.0, sxx = 0.0, mean = 0.0;
    for (const auto& [x, y] : pts) {
        sxy += x * y;
        sxx += x * x;
        mean += y;
    }
    mean /= double(pts.size());
    f.slope = sxy / sxx;
    double ss = 0.0;
    for (const auto& [x, y] : pts) ss += (y - f.slope * x) * (y - f.slope * x);
    f.residual = std::sqrt(ss / double(pts.size()));
    f.ill_conditioned = f.residual > 0.2 * mean;
    f.used = std::move(pts);
    return f;
}

}  // namespace detail

/// Least-squares line d0 = a / Omega through the origin, over samples with
/// Omega >= 2 omega0. When the misfit exceeds 20% of the mean d0 the sample
/// with the smallest Omega is dropped (it is the one furthest from the
/// Omega >> omega0 regime) while at least three remain.
inline SlopeFit fit_slope(std::vector<std::pair<double, double>> samples) {
    std::vector<std::pair<double, double>> dropped;
    std::vector<std::pair<double, double>> pts;
    for (const auto& s : samples) {
        if (!(s.first > 0.0) || !std::isfinite(s.second)) throw ConfigError("slope samples need 1/Omega > 0");
        (s.first <= 0.5 * ModelParams::omega0 + 1e-12 ? pts : dropped).push_back(s);
    }
    if (pts.size() < 3) throw ConfigError("slope fit needs at least three samples with Omega >= 2 omega0");
    std::sort(pts.begin(), pts.end());
    SlopeFit f = detail::fit_through_origin(pts);
    while (f.ill_conditioned) {
        const double x_max = pts.back().first;
        std::vector<std::pair<double, double>> rest;
        for (const auto& s : pts) (s.first < x_max ? rest : dropped).push_back(s);
        if (rest.size() < 3 || rest.size() == pts.size()) break;
        pts = std::move(rest);
        f = detail::fit_through_origin(pts);
    }
    f.dropped = std::move(dropped);
    return f;
}

}  // namespace bathent
