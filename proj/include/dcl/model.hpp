#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

// Core domain types shared by every module: the surplus model, the control
// problem parameters, and the (value, d1, d2) triple returned by the
// scale-function evaluators.

namespace dcl {

// Uncontrolled surplus: Brownian motion with drift mu and volatility sigma.
struct ModelParams {
    double mu = 0.0;
    double sigma = 1.0;
};

// Control problem: discount rate q and maximal linear payout rate factor k.
struct ControlParams {
    double q = 0.05;
    double k = 0.1;
};

// Function value with first and second derivative at a point.
struct ScaleEval {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

// Raised when an internal quadrature cannot reach its target accuracy.
struct AccuracyError : std::runtime_error {
    explicit AccuracyError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a root solve cannot establish a sign change on its bracket.
struct BracketError : std::runtime_error {
    explicit BracketError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a linear-system denominator degenerates (not expected for
// valid parameters).
struct DegenerateError : std::runtime_error {
    explicit DegenerateError(const std::string& what) : std::runtime_error(what) {}
};

// Raised for malformed simulation / experiment configuration.
struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

inline void require_model(const ModelParams& m) {
    if (!(m.sigma > 0.0) || !std::isfinite(m.sigma) || !std::isfinite(m.mu))
        throw std::domain_error("ModelParams: require finite mu and sigma > 0");
}

// k = 0 is admitted only where the controlled process degenerates to a
// Brownian motion (simulator paths); everything analytic needs k > 0.
inline void require_control(const ControlParams& c, bool allow_zero_k = false) {
    if (!(c.q > 0.0) || !std::isfinite(c.q))
        throw std::domain_error("ControlParams: require finite q > 0");
    const bool k_ok = allow_zero_k ? (c.k >= 0.0) : (c.k > 0.0);
    if (!k_ok || !std::isfinite(c.k))
        throw std::domain_error(allow_zero_k ? "ControlParams: require finite k >= 0"
                                             : "ControlParams: require finite k > 0");
}

}  // namespace dcl
