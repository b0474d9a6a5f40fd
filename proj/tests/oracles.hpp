#pragma once

#include <cmath>
#include <cstdint>
#include <functional>

// Test-only oracles, deliberately independent of the library's evaluation
// paths: a Spouge-series Gamma, a long-double Simpson rule for the parabolic
// cylinder integral, and central finite differences for derivative checks.

namespace oracles {

// Spouge's approximation with a = 24 in long double; error well below 1e-15
// relative on the positive axis.
inline long double spouge_gamma(long double z) {
    constexpr int a = 24;
    long double acc = std::sqrt(2.0L * 3.14159265358979323846264338327950288L);
    long double num = 1.0L;
    for (int k = 1; k < a; ++k) {
        // c_k = (-1)^{k-1} / (k-1)! * (a-k)^{k-1/2} e^{a-k}
        num *= (k == 1) ? 1.0L : -1.0L / (k - 1);
        const long double ck = num * std::pow((long double)(a - k), k - 0.5L) *
                               std::exp((long double)(a - k));
        acc += ck / (z + k - 1.0L);
    }
    return acc * std::exp(-(z + a - 1.0L)) * std::pow(z + a - 1.0L, z - 0.5L);
}

// Composite Simpson evaluation of \int_0^T t^{lambda-1} e^{-x t - t^2/2} dt
// in long double, under the substitution t = s^4 which turns the t^{lambda-1}
// weight into s^{4 lambda - 1}: smooth at the origin whenever 4*lambda is an
// integer (every lambda this oracle is asked for). Truncation sits far past
// the integrand peak.
inline long double simpson_pcf_integral(long double lambda, long double x, int n = 400001) {
    const long double cpad = std::max(lambda - 1.0L, 1.0L);
    const long double t_up = 0.5L * (-x + std::sqrt(x * x + 4.0L * cpad));
    const long double T = t_up + 14.0L;
    const long double S = std::pow(T, 0.25L);
    const long double h = S / (n - 1);
    auto f = [&](long double s) -> long double {
        if (s <= 0.0L) return 0.0L;
        const long double t = s * s * s * s;
        return 4.0L * std::exp((4.0L * lambda - 1.0L) * std::log(s) - x * t - 0.5L * t * t);
    };
    long double acc = f(0.0L) + f(S);
    for (int i = 1; i < n - 1; ++i) acc += f(i * h) * ((i % 2) ? 4.0L : 2.0L);
    return acc * h / 3.0L;
}

// D_{-lambda}(x) for lambda >= 1 through the Simpson oracle.
inline double simpson_pcf(double lambda, double x) {
    const long double J = simpson_pcf_integral(lambda, x);
    return static_cast<double>(std::exp(-0.25L * (long double)x * x) * J /
                               spouge_gamma((long double)lambda));
}

// Gaussian identity for lambda = 1: D_{-1}(x) = e^{x^2/4} sqrt(2 pi) Phi(-x).
inline double pcf_via_erfc(double x) {
    const double phi_neg = 0.5 * std::erfc(x / std::sqrt(2.0));
    return std::exp(0.25 * x * x) * std::sqrt(2.0 * 3.141592653589793238462643) * phi_neg;
}

inline double central_d1(const std::function<double(double)>& f, double x, double eps) {
    return (f(x + eps) - f(x - eps)) / (2.0 * eps);
}

inline double central_d2(const std::function<double(double)>& f, double x, double eps) {
    return (f(x + eps) - 2.0 * f(x) + f(x - eps)) / (eps * eps);
}

// Small deterministic generator for parameter sweeps in property tests.
struct ParamRng {
    std::uint64_t state;
    explicit ParamRng(std::uint64_t seed) : state(seed) {}

    double next01() {
        state += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return (z >> 11) * 0x1.0p-53;
    }

    double in(double lo, double hi) { return lo + (hi - lo) * next01(); }
};

}  // namespace oracles
