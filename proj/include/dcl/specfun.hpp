#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dcl/model.hpp"

// Special-function layer: Gamma, the parabolic cylinder function D_{-lambda}
// evaluated from its integral representation
//
//     D_{-lambda}(x) = (1/Gamma(lambda)) e^{-x^2/4}
//                      \int_0^inf t^{lambda-1} e^{-x t - t^2/2} dt ,
//
// the two-sided-exit scale function W of the drifted Brownian motion, and the
// decreasing positive solution H of the killed Ornstein-Uhlenbeck generator.
// W and H carry first and second derivatives; second derivatives always come
// from the governing ODE identities so that finite differences stay available
// as an independent check in tests.

namespace dcl {

namespace detail {

// 15-point Kronrod rule on [-1, 1] (QUADPACK dqk15 abscissae/weights).
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};

inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};

// Exponent of the integrand: phi(t) = (lambda-1) ln t - y t - t^2/2.
struct PcfExponent {
    double lambda_m1;  // lambda - 1
    double y;

    double operator()(double t) const {
        double e = -y * t - 0.5 * t * t;
        if (lambda_m1 != 0.0) e += lambda_m1 * std::log(t);
        return e;
    }
};

template <typename F>
double kronrod15(const F& f, double lo, double hi) {
    const double c = 0.5 * (lo + hi);
    const double h = 0.5 * (hi - lo);
    double acc = kKronrodWeights[7] * f(c);
    for (int i = 0; i < 7; ++i) {
        const double dx = h * kKronrodNodes[i];
        acc += kKronrodWeights[i] * (f(c - dx) + f(c + dx));
    }
    return acc * h;
}

template <typename F>
double composite_kronrod(const F& f, double lo, double hi, int panels) {
    const double w = (hi - lo) / panels;
    double acc = 0.0;
    for (int p = 0; p < panels; ++p)
        acc += kronrod15(f, lo + p * w, lo + (p + 1) * w);
    return acc;
}

// log of \int_0^inf t^{lambda-1} e^{-y t - t^2/2} dt, lambda > 0.
//
// Layout: the head [0, eps] is integrated exactly through the power series of
// e^{-y t - t^2/2} (the t^{lambda-1} weight is not resolvable by any fixed
// quadrature when lambda << 1); the finite panel [eps, T] uses a composite
// Kronrod rule whose panel count doubles until two successive estimates agree
// to 1e-11 relative; the tail [T, inf) is mapped to (0, 1] by the exponential
// substitution t = T - ln u and handled by the same rule. T sits a fixed
// margin past the integrand's peak, and the finite panel is scaled by the
// peak exponent so only the final combination exponentiates.
inline double log_pcf_integral(double lambda, double y) {
    const double eps = std::min(1.0, 1.0 / (1.0 + std::abs(y)));

    // Head: sum a_n eps^{lambda+n} / (lambda+n), a_n the Maclaurin
    // coefficients of e^{-y t - t^2/2}; |a_n eps^n| <= 1/n! by choice of eps.
    double log_head;
    {
        double a_prev = 1.0;       // a_0
        double a_cur = -y;         // a_1
        double s = 1.0 / lambda + a_cur * eps / (lambda + 1.0);
        double epow = eps;
        for (int n = 2; n <= 34; ++n) {
            const double a_next = -(y * a_cur + a_prev) / n;
            a_prev = a_cur;
            a_cur = a_next;
            epow *= eps;
            s += a_cur * epow / (lambda + n);
        }
        log_head = (s > 0.0) ? lambda * std::log(eps) + std::log(s)
                             : -std::numeric_limits<double>::infinity();
    }

    const PcfExponent phi{lambda - 1.0, y};

    // Peak of phi solves t^2 + y t - (lambda-1) = 0; pad the panel end so the
    // super-Gaussian decay (curvature >= 1) makes the remainder negligible.
    const double cpad = std::max(lambda - 1.0, 1.0);
    const double t_up = 0.5 * (-y + std::sqrt(y * y + 4.0 * cpad));
    const double T = std::max(t_up + 13.0, eps + 1.0);

    // Scale by the maximum of phi on [eps, T].
    double peak = std::max(phi(eps), phi(T));
    const double disc = y * y + 4.0 * (lambda - 1.0);
    if (disc >= 0.0) {
        const double root = 0.5 * (-y + std::sqrt(disc));
        if (root > eps && root < T) peak = std::max(peak, phi(root));
    }
    const double scale = peak;

    const auto mid_f = [&](double t) { return std::exp(phi(t) - scale); };
    const auto tail_f = [&](double u) {
        const double t = T - std::log(u);
        return std::exp(phi(t) - scale + (t - T));
    };

    constexpr double rel_tol = 1e-11;
    double prev = composite_kronrod(mid_f, eps, T, 16) + composite_kronrod(tail_f, 0.0, 1.0, 8);
    double total = prev;
    bool converged = false;
    for (int panels = 32; panels <= 8192; panels *= 2) {
        total = composite_kronrod(mid_f, eps, T, panels) +
                composite_kronrod(tail_f, 0.0, 1.0, std::max(8, panels / 4));
        if (std::abs(total - prev) <= rel_tol * std::abs(total)) {
            converged = true;
            break;
        }
        prev = total;
    }
    if (!converged)
        throw AccuracyError("pcf integral: panel refinement did not reach 1e-11 agreement");

    const double log_body = scale + std::log(total);

    // log(head + body) without leaving log space.
    const double hi = std::max(log_head, log_body);
    const double lo = std::min(log_head, log_body);
    if (hi == -std::numeric_limits<double>::infinity()) return hi;
    const double d = lo - hi;
    return (d < -745.0) ? hi : hi + std::log1p(std::exp(d));
}

constexpr double kMaxLambda = 1e4;  // quadrature conditioning cap

inline void require_lambda(double lambda) {
    if (!(lambda > 0.0))
        throw std::domain_error("pcf: require lambda > 0");
    if (lambda > kMaxLambda)
        throw AccuracyError("pcf: lambda above supported cap 1e4");
}

// log of e^{y^2/4} D_{-lambda}(y): the Gaussian prefactor cancels against the
// e^{-y^2/4} of the integral representation.
inline double log_weighted_pcf(double lambda, double y) {
    return log_pcf_integral(lambda, y) - std::lgamma(lambda);
}

}  // namespace detail

// Gamma function on the positive half line, 12+ significant digits.
// (Named gamma_fn: glibc still ships a legacy ::gamma that would collide.)
inline double gamma_fn(double lambda) {
    if (!(lambda > 0.0))
        throw std::domain_error("gamma: require lambda > 0");
    return std::tgamma(lambda);
}

// Parabolic cylinder function D_{-lambda}(x), lambda > 0, via quadrature of
// the integral representation. Extreme arguments may overflow/underflow the
// double range; the supported envelope keeps |x| moderate.
inline double pcf(double lambda, double x) {
    detail::require_lambda(lambda);
    return std::exp(-0.25 * x * x + detail::log_weighted_pcf(lambda, x));
}

// Scale function W of the drifted Brownian motion, with W' from its closed
// form and W'' from the ODE identity W'' = (2/sigma^2)(q W - mu W').
// W vanishes on (-inf, 0]; at x = 0 the derivative slots hold right limits.
inline ScaleEval w_scale(double x, const ModelParams& m, const ControlParams& c) {
    require_model(m);
    if (!(c.q > 0.0)) throw std::domain_error("w_scale: require q > 0");
    if (x < 0.0) return {0.0, 0.0, 0.0};

    const double sig2 = m.sigma * m.sigma;
    const double s = std::sqrt(m.mu * m.mu + 2.0 * c.q * sig2);
    const double omega = s / sig2;
    const double a = m.mu / sig2;

    // (2/s) e^{-a x} sinh(omega x) written as a difference of exponentials so
    // large omega*x never meets sinh overflow before the product decays.
    const double ep = std::exp((omega - a) * x);
    const double em = std::exp(-(omega + a) * x);
    ScaleEval out;
    out.value = (x == 0.0) ? 0.0 : (ep - em) / s;
    out.d1 = ((omega - a) * ep + (omega + a) * em) / s;
    out.d2 = (2.0 / sig2) * (c.q * out.value - m.mu * out.d1);
    return out;
}

// Fundamental decreasing solution H of the killed OU generator,
//   H(x) = e^{K(x - mu/K)^2 / (2 sigma^2)} D_{-q/K}( (x - mu/K) sqrt(2K) / sigma ),
// with H' from the parameter-shift recurrence
//   H' = -(q sqrt(2K) / (K sigma)) H^{(q+K)}
// and H'' from the ODE identity H'' = (2/sigma^2)((K x - mu) H' + q H).
inline ScaleEval h_func(double x, const ModelParams& m, const ControlParams& c) {
    require_model(m);
    if (!(c.q > 0.0)) throw std::domain_error("h_func: require q > 0");
    if (!(c.k > 0.0)) throw std::domain_error("h_func: require k > 0");

    const double lambda = c.q / c.k;
    detail::require_lambda(lambda);
    const double root2k = std::sqrt(2.0 * c.k);
    const double y = (x - m.mu / c.k) * root2k / m.sigma;

    ScaleEval out;
    out.value = std::exp(detail::log_weighted_pcf(lambda, y));
    out.d1 = -(c.q * root2k / (c.k * m.sigma)) * std::exp(detail::log_weighted_pcf(lambda + 1.0, y));
    out.d2 = (2.0 / (m.sigma * m.sigma)) * ((c.k * x - m.mu) * out.d1 + c.q * out.value);
    return out;
}

}  // namespace dcl
