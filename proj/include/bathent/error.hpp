#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bathent {

enum class ErrorKind { Config, Numerical, OracleDisagreement };

// Reasons a numerical routine gives up. The CLI maps every one of these to
// exit status 3.
enum class NumericalFailure {
    Domain,            // argument outside the convergence region of a transform
    LogDivergent,      // noise kernel at coincident arguments
    NearSingular,      // channel determinant too close to a pole
    NonConvergence,    // Durbin series tail above tolerance
    Truncation,        // frequency tail beyond omega_max above tolerance
    Unphysical,        // covariance violates the uncertainty relation
    GridCoverage,      // requested time outside the stored Green's function grid
    Pairing,           // symplectic spectrum does not come in +/- pairs
    Bracket,           // bisection bracket has no sign change
    AmbiguousPeak,     // first and second transient peaks cannot be separated
    Unstable,          // oracle Hamiltonian is not positive definite
    Symplecticity,     // oracle propagator lost orthogonality
};

constexpr std::string_view to_string(NumericalFailure f) {
    switch (f) {
        case NumericalFailure::Domain: return "domain";
        case NumericalFailure::LogDivergent: return "log-divergent";
        case NumericalFailure::NearSingular: return "near-singular";
        case NumericalFailure::NonConvergence: return "non-convergence";
        case NumericalFailure::Truncation: return "truncation";
        case NumericalFailure::Unphysical: return "unphysical";
        case NumericalFailure::GridCoverage: return "grid-coverage";
        case NumericalFailure::Pairing: return "pairing";
        case NumericalFailure::Bracket: return "bracket";
        case NumericalFailure::AmbiguousPeak: return "ambiguous-peak";
        case NumericalFailure::Unstable: return "unstable";
        case NumericalFailure::Symplecticity: return "symplecticity";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class NumericalError : public Error {
public:
    NumericalError(NumericalFailure failure, const std::string& what)
        : Error(ErrorKind::Numerical, std::string(to_string(failure)) + ": " + what),
          failure_(failure) {}
    NumericalFailure failure() const noexcept { return failure_; }

private:
    NumericalFailure failure_;
};

class OracleDisagreement : public Error {
public:
    explicit OracleDisagreement(const std::string& what)
        : Error(ErrorKind::OracleDisagreement, what) {}
};

}  // namespace bathent
