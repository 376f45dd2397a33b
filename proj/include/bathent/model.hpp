#pragma once

// Physical parameters of two identical oscillators coupled to a common
// one-dimensional bosonic bath. Natural units throughout:
// omega0 = c = hbar = k_B = m = 1. Distances are in c/omega0, frequencies in
// omega0, temperature in hbar*omega0/k_B.

#include <cmath>
#include <numbers>
#include <string>

#include "bathent/error.hpp"

namespace bathent {

struct ModelParams {
    static constexpr double omega0 = 1.0;
    static constexpr double mass = 1.0;
    static constexpr double light_speed = 1.0;

    double gamma = 1.0;        // damping constant
    double omega_cut = 10.0;   // Drude cutoff Omega
    double temperature = 0.0;  // T == 0 is exact, not a small positive number
    double distance = 0.0;     // separation r

    double cutoff_wavelength() const { return 2.0 * std::numbers::pi * light_speed / omega_cut; }

    ModelParams with_distance(double r) const {
        ModelParams p = *this;
        p.distance = r;
        return p;
    }
    ModelParams with_gamma(double g) const {
        ModelParams p = *this;
        p.gamma = g;
        return p;
    }
    ModelParams with_temperature(double t) const {
        ModelParams p = *this;
        p.temperature = t;
        return p;
    }
    ModelParams with_omega_cut(double w) const {
        ModelParams p = *this;
        p.omega_cut = w;
        return p;
    }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

inline ModelParams validate(const ModelParams& p) {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(p.gamma) || !(p.gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (!finite(p.omega_cut) || !(p.omega_cut > 0.0))
        throw ConfigError("omega_cut must be positive");
    if (!finite(p.temperature) || p.temperature < 0.0)
        throw ConfigError("temperature must be non-negative (got negative temperature)");
    if (!finite(p.distance) || p.distance < 0.0)
        throw ConfigError("distance must be non-negative");
    return p;
}

/// Ohmic spectral density with a Drude cutoff,
/// J(w) = (2 m gamma / pi) w Omega^2 / (Omega^2 + w^2).
/// Maximum at w = Omega; decays like 1/w above it.
inline double spectral_density(double omega, const ModelParams& p) {
    const double W2 = p.omega_cut * p.omega_cut;
    return 2.0 * ModelParams::mass * p.gamma / std::numbers::pi * omega * W2 / (W2 + omega * omega);
}

}  // namespace bathent
