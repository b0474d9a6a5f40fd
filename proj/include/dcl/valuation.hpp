#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "dcl/model.hpp"
#include "dcl/specfun.hpp"

// Closed-form value function of a delayed linear payout strategy with barrier
// b: below the barrier the value is a multiple of the Brownian scale function
// W, above it an affine term plus a multiple of the OU solution H. The
// coefficients make the two branches paste continuously with matching first
// derivative at b. hjb_check evaluates the variational (HJB) conditions that
// certify optimality of a candidate barrier.

namespace dcl {

struct ValueFunctionRep {
    double b = 0.0;    // barrier
    double c_b = 0.0;  // coefficient on W below b
    double d_b = 0.0;  // coefficient on H above b
    ModelParams m;
    ControlParams c;
};

struct HjbReport {
    std::vector<double> grid;
    std::vector<double> residual;  // scaled by 1/(1 + |q v|)
    std::vector<bool> gradient_ok;
    double max_abs_residual = 0.0;
};

// Coefficient pair (C_b, D_b) of the two value-function branches. The shared
// denominator W'(b)H(b) - W(b)H'(b) is strictly positive for valid
// parameters (W' > 0, H > 0, W >= 0, H' < 0).
inline std::pair<double, double> coefficients(double b, const ModelParams& m,
                                              const ControlParams& c) {
    if (!(b >= 0.0)) throw std::domain_error("coefficients: require b >= 0");
    require_control(c);
    const ScaleEval w = w_scale(b, m, c);
    const ScaleEval h = h_func(b, m, c);
    const double den = w.d1 * h.value - w.value * h.d1;
    if (!(std::abs(den) > 1e-300))
        throw DegenerateError("coefficients: pasting system denominator degenerate");
    const double lvl = b + m.mu / c.q;
    return {(h.value - lvl * h.d1) / den, (w.value - lvl * w.d1) / den};
}

inline ValueFunctionRep make_value_function(double b, const ModelParams& m,
                                            const ControlParams& c) {
    const auto [cb, db] = coefficients(b, m, c);
    return ValueFunctionRep{b, cb, db, m, c};
}

inline double value(double x, const ValueFunctionRep& rep) {
    if (x <= 0.0) return 0.0;
    const double f = rep.c.k / (rep.c.q + rep.c.k);
    if (x <= rep.b) return f * rep.c_b * w_scale(x, rep.m, rep.c).value;
    return f * (x + rep.m.mu / rep.c.q + rep.d_b * h_func(x, rep.m, rep.c).value);
}

// One-sided derivatives of the two branches; at x != b the matching branch is
// the derivative proper. v'' jumps at b unless b solves the optimality
// equation, hence the left/right split.
inline double value_d1_left(double x, const ValueFunctionRep& rep) {
    const double f = rep.c.k / (rep.c.q + rep.c.k);
    return f * rep.c_b * w_scale(x, rep.m, rep.c).d1;
}

inline double value_d1_right(double x, const ValueFunctionRep& rep) {
    const double f = rep.c.k / (rep.c.q + rep.c.k);
    return f * (1.0 + rep.d_b * h_func(x, rep.m, rep.c).d1);
}

inline double value_d1(double x, const ValueFunctionRep& rep) {
    return (x <= rep.b) ? value_d1_left(x, rep) : value_d1_right(x, rep);
}

inline double value_d2_left(double x, const ValueFunctionRep& rep) {
    const double f = rep.c.k / (rep.c.q + rep.c.k);
    return f * rep.c_b * w_scale(x, rep.m, rep.c).d2;
}

inline double value_d2_right(double x, const ValueFunctionRep& rep) {
    const double f = rep.c.k / (rep.c.q + rep.c.k);
    return f * rep.d_b * h_func(x, rep.m, rep.c).d2;
}

inline double value_d2(double x, const ValueFunctionRep& rep) {
    return (x <= rep.b) ? value_d2_left(x, rep) : value_d2_right(x, rep);
}

// HJB residual and gradient conditions over a strictly increasing positive
// grid. Below b: (sigma^2/2) v'' + mu v' - q v = 0 and v' >= 1.
// Above b: (sigma^2/2) v'' + (mu - Kx) v' - q v + Kx = 0 and v' <= 1.
// Residuals are reported relative to (1 + |q v|); the gradient comparisons
// carry a 1e-9 slack since v'(b*) = 1 holds exactly at the optimum.
inline HjbReport hjb_check(const ValueFunctionRep& rep, const std::vector<double>& grid) {
    constexpr double kGradSlack = 1e-9;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0) || (i > 0 && !(grid[i] > grid[i - 1])))
            throw ConfigError("hjb_check: grid must be strictly increasing and positive");
    }
    HjbReport rep_out;
    rep_out.grid = grid;
    rep_out.residual.reserve(grid.size());
    rep_out.gradient_ok.reserve(grid.size());
    const double half_sig2 = 0.5 * rep.m.sigma * rep.m.sigma;
    for (double x : grid) {
        const double v = value(x, rep);
        double raw;
        bool grad_ok;
        if (x <= rep.b) {
            const double d1 = value_d1_left(x, rep);
            raw = half_sig2 * value_d2_left(x, rep) + rep.m.mu * d1 - rep.c.q * v;
            grad_ok = d1 >= 1.0 - kGradSlack;
        } else {
            const double d1 = value_d1_right(x, rep);
            raw = half_sig2 * value_d2_right(x, rep) + (rep.m.mu - rep.c.k * x) * d1 -
                  rep.c.q * v + rep.c.k * x;
            grad_ok = d1 <= 1.0 + kGradSlack;
        }
        const double scaled = raw / (1.0 + std::abs(rep.c.q * v));
        rep_out.residual.push_back(scaled);
        rep_out.gradient_ok.push_back(grad_ok);
        rep_out.max_abs_residual = std::max(rep_out.max_abs_residual, std::abs(scaled));
    }
    return rep_out;
}

}  // namespace dcl
