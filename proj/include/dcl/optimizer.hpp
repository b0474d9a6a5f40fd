#pragma once

#include <cmath>
#include <stdexcept>

#include "dcl/model.hpp"
#include "dcl/specfun.hpp"

// Barrier optimization. The regime dichotomy compares mu*K/q^2 against
// Delta = -H(0)/H'(0): at or below Delta the linear strategy (barrier 0) is
// optimal, above it a unique interior barrier b* in (0, c*) solves
//
//   (K+q) [ W(b)/W'(b) - mu/q ] + K (mu/K - b) = q H(b)/H'(b) ,
//
// which is the smooth-fit (C^2 pasting) condition of the value function.
// c* is the reflection level of the classical singular-control problem and
// bounds b* from above.

namespace dcl {

enum class Regime { LinearAtZero, DelayedAtBStar };

struct RegimeDecision {
    double delta = 0.0;      // -H(0)/H'(0)
    double threshold = 0.0;  // mu K / q^2
    Regime regime = Regime::LinearAtZero;
    double b_star = 0.0;  // 0 in the LinearAtZero regime
    double c_star = 0.0;
    double residual = 0.0;  // smooth-fit equation residual at b_star
};

enum class KRegime { SmallK, LargeK };

struct OrderingReport {
    KRegime kind = KRegime::SmallK;
    double b_star = 0.0;
    double mu_over_k = 0.0;
    double c_star = 0.0;
    double mu_over_q = 0.0;
    bool b_star_below_mu_over_k = false;
};

// Optimal reflection level of the classical problem:
//   c* = sigma^2/sqrt(mu^2+2q sigma^2) * ln((mu+s)/(-mu+s)), s the sqrt.
// Positive for mu > 0, zero at mu = 0, and satisfies W(c*)/W'(c*) = mu/q.
inline double classical_barrier(const ModelParams& m, const ControlParams& c) {
    require_model(m);
    if (!(c.q > 0.0)) throw std::domain_error("classical_barrier: require q > 0");
    const double disc = m.mu * m.mu + 2.0 * c.q * m.sigma * m.sigma;
    if (!(disc > 0.0))  // unreachable for sigma > 0, q > 0
        throw std::domain_error("classical_barrier: mu^2 + 2 q sigma^2 must be positive");
    const double s = std::sqrt(disc);
    return m.sigma * m.sigma / s * std::log((m.mu + s) / (-m.mu + s));
}

inline double delta_threshold(const ModelParams& m, const ControlParams& c) {
    const ScaleEval h0 = h_func(0.0, m, c);
    return -h0.value / h0.d1;
}

namespace detail {

// Residual of the smooth-fit equation rearranged to
//   (K+q)[W/W' - mu/q] + K(mu/K - b) - q H/H' .
// Negative left of the root, positive right of it.
inline double smooth_fit_residual(double b, const ModelParams& m, const ControlParams& c) {
    const ScaleEval w = w_scale(b, m, c);
    const ScaleEval h = h_func(b, m, c);
    const double w_ratio = w.value / w.d1;  // 0 at b = 0 since W(0) = 0
    return (c.k + c.q) * (w_ratio - m.mu / c.q) + (m.mu - c.k * b) -
           c.q * h.value / h.d1;
}

}  // namespace detail

// Regime classification and, in the interior regime, the bracketed root of
// the smooth-fit equation on (0, c*). Bisection with secant refinement;
// derivative-free since H''/H' ratios near the root are cancellation-prone.
inline RegimeDecision solve_b_star(const ModelParams& m, const ControlParams& c) {
    require_model(m);
    require_control(c);
    if (!(m.mu > 0.0))
        throw std::domain_error("solve_b_star: require mu > 0 (c* <= 0 otherwise)");

    RegimeDecision dec;
    dec.c_star = classical_barrier(m, c);
    dec.delta = delta_threshold(m, c);
    dec.threshold = m.mu * c.k / (c.q * c.q);

    if (dec.threshold <= dec.delta) {  // boundary equality classified here
        dec.regime = Regime::LinearAtZero;
        dec.b_star = 0.0;
        dec.residual = detail::smooth_fit_residual(0.0, m, c);
        return dec;
    }

    dec.regime = Regime::DelayedAtBStar;
    // Offset the endpoints so W(0) = 0 never enters a quotient.
    double lo = 1e-10 * dec.c_star;
    double hi = (1.0 - 1e-10) * dec.c_star;
    double flo = detail::smooth_fit_residual(lo, m, c);
    double fhi = detail::smooth_fit_residual(hi, m, c);
    if (!(flo < 0.0 && fhi > 0.0))
        throw BracketError("solve_b_star: no sign change on (0, c*); specfun accuracy suspect");

    const double tol = 1e-13 * dec.c_star;
    for (int it = 0; it < 200 && (hi - lo) > tol; ++it) {
        // Secant proposal, kept only if it lands well inside the bracket.
        double cand = hi - fhi * (hi - lo) / (fhi - flo);
        const double margin = 0.01 * (hi - lo);
        if (!(cand > lo + margin && cand < hi - margin)) cand = 0.5 * (lo + hi);
        const double fc = detail::smooth_fit_residual(cand, m, c);
        if (fc == 0.0) {
            lo = hi = cand;
            break;
        }
        if (fc < 0.0) {
            lo = cand;
            flo = fc;
        } else {
            hi = cand;
            fhi = fc;
        }
    }
    dec.b_star = 0.5 * (lo + hi);
    dec.residual = detail::smooth_fit_residual(dec.b_star, m, c);
    return dec;
}

// Position of b* relative to mu/K. SmallK: c* below both mu/q and mu/K, and
// then b* < mu/K. LargeK: mu/K < c* (< mu/q always), and b* < mu/K exactly
// when the smooth-fit residual at mu/K is already positive.
inline OrderingReport ordering_report(const ModelParams& m, const ControlParams& c) {
    const RegimeDecision dec = solve_b_star(m, c);
    if (dec.regime != Regime::DelayedAtBStar)
        throw std::invalid_argument("ordering_report: requires the interior-barrier regime");

    OrderingReport rep;
    rep.b_star = dec.b_star;
    rep.mu_over_k = m.mu / c.k;
    rep.c_star = dec.c_star;
    rep.mu_over_q = m.mu / c.q;
    if (dec.c_star < std::min(rep.mu_over_q, rep.mu_over_k)) {
        rep.kind = KRegime::SmallK;
        rep.b_star_below_mu_over_k = true;  // b* < c* < mu/K
    } else {
        rep.kind = KRegime::LargeK;
        rep.b_star_below_mu_over_k =
            detail::smooth_fit_residual(rep.mu_over_k, m, c) > 0.0;
    }
    return rep;
}

}  // namespace dcl
