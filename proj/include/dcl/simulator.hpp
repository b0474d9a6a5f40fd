#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "dcl/model.hpp"

// Monte Carlo engine for the refracted diffusion
//     dU_t = (mu - K U_t 1{U_t > b}) dt + sigma dB_t ,
// with two discretizations: plain Euler-Maruyama, and the piecewise-constant-
// noise construction that freezes the Brownian increment over each partition
// cell and integrates the resulting linear ODE exactly inside the cell.
//
// Determinism contract: every path draws from its own generator seeded by
// (master seed, path index) and reductions are pairwise over the path-indexed
// array, so results are bit-identical regardless of the number of worker
// threads. First passage through a barrier between grid points is sampled
// from the Brownian-bridge crossing law conditional on the step endpoints.

namespace dcl {

namespace rng {

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// SplitMix64 stream; the per-path state is derived by hashing the master
// seed with the path index, making path i reproducible in isolation.
struct SplitMix64 {
    std::uint64_t state = 0;

    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ULL;
        return mix64(state);
    }
};

// 256-layer ziggurat tables for the standard normal, built once from the
// closure constants R, V of the layer recursion.
struct ZigguratTables {
    std::array<double, 257> x{};
    std::array<double, 257> f{};
    std::array<double, 256> ratio{};
    static constexpr double kR = 3.6541528853610087716;
    static constexpr double kV = 0.0049286732339746553474;

    ZigguratTables() {
        x[0] = kV / std::exp(-0.5 * kR * kR);
        x[1] = kR;
        f[0] = 1.0;
        f[1] = std::exp(-0.5 * kR * kR);
        for (int i = 2; i < 256; ++i) {
            x[i] = std::sqrt(-2.0 * std::log(kV / x[i - 1] + std::exp(-0.5 * x[i - 1] * x[i - 1])));
            f[i] = std::exp(-0.5 * x[i] * x[i]);
        }
        x[256] = 0.0;
        f[256] = 1.0;
        for (int i = 0; i < 256; ++i) ratio[i] = x[i + 1] / x[i];
    }
};

inline const ZigguratTables& ziggurat_tables() {
    static const ZigguratTables tables;
    return tables;
}

struct PathRng {
    SplitMix64 sm;

    PathRng(std::uint64_t seed, std::uint64_t path_index) {
        sm.state = mix64(seed ^ mix64((path_index + 1) * 0x9E3779B97F4A7C15ULL));
    }

    // (0, 1]
    double uniform() { return ((sm.next() >> 11) + 1) * 0x1.0p-53; }
    // [0, 1)
    double uniform_co() { return (sm.next() >> 11) * 0x1.0p-53; }

    double normal() {
        const ZigguratTables& t = ziggurat_tables();
        for (;;) {
            const std::uint64_t raw = sm.next();
            const int i = static_cast<int>(raw & 0xFF);
            const double u = (raw >> 11) * 0x1.0p-53 * 2.0 - 1.0;  // [-1, 1)
            if (std::abs(u) < t.ratio[i]) return u * t.x[i];
            if (i == 0) {
                // Tail beyond R.
                double xs, ys;
                do {
                    xs = -std::log(uniform()) / ZigguratTables::kR;
                    ys = -std::log(uniform());
                } while (ys + ys < xs * xs);
                return (u > 0.0) ? ZigguratTables::kR + xs : -(ZigguratTables::kR + xs);
            }
            const double xx = u * t.x[i];
            if (t.f[i + 1] + uniform_co() * (t.f[i] - t.f[i + 1]) < std::exp(-0.5 * xx * xx))
                return xx;
        }
    }
};

}  // namespace rng

// Worker count: DCL_THREADS when set, hardware concurrency otherwise.
// Results never depend on it.
inline unsigned worker_count() {
    if (const char* env = std::getenv("DCL_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1 && v < 1024) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

enum class Scheme { EulerMaruyama, PiecewiseNoise };

struct SimConfig {
    double step = 1e-3;
    double horizon = 100.0;
    std::uint64_t paths = 10000;
    std::uint64_t seed = 1;
    Scheme scheme = Scheme::EulerMaruyama;
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;  // NaN when paths == 1
    std::uint64_t n = 0;
    Scheme scheme = Scheme::EulerMaruyama;
    double step = 0.0;
};

inline bool high_variance(const McEstimate& e) {
    return std::isfinite(e.std_error) && e.std_error > 0.05 * std::abs(e.mean);
}

enum class FunctionalKind {
    DiscountedDividends,   // v_b(x0): discounted payout stream up to ruin
    FirstPassageLaplace,   // OU downward passage: E[e^{-q tau_a}], target H(x0)/H(a)
    TwoSidedExit,          // BM: E[e^{-q tau_a} 1{tau_a < tau_0}], target W(x0)/W(a)
    DiscountedLinearOU,    // E[int e^{-qt} U_t dt], target (x0 + mu/q)/(q+K)
};

struct PathFunctionalSpec {
    FunctionalKind kind = FunctionalKind::DiscountedDividends;
    double x0 = 0.0;
    double level = std::numeric_limits<double>::quiet_NaN();  // a, where applicable
};

struct StopSpec {
    bool on_ruin = false;                // stop when the state goes below 0
    std::optional<double> level;         // stop on first passage of this level
};

enum class StopCause { Horizon, Ruin, Level };

struct SimPath {
    std::vector<double> times;
    std::vector<double> states;
    StopCause cause = StopCause::Horizon;
};

// Barrier sentinel: with b = -inf the indicator is identically one and the
// dynamics are the plain OU everywhere (used by the OU functionals).
inline constexpr double kAlwaysRefract = -std::numeric_limits<double>::infinity();

namespace detail {

inline void validate_config(const SimConfig& cfg) {
    if (!(cfg.step > 0.0) || !std::isfinite(cfg.step))
        throw ConfigError("SimConfig: step must be positive and finite");
    if (!(cfg.horizon >= cfg.step) || !std::isfinite(cfg.horizon))
        throw ConfigError("SimConfig: horizon must be finite and >= step");
    if (cfg.paths < 1) throw ConfigError("SimConfig: paths must be >= 1");
}

// Exact flow of du/dt = mu - k u 1{u > b} over dt. ekdt = exp(-k dt) is
// passed in precomputed for the no-crossing OU case. When the flow reaches b
// with mu > 0 > mu - k b the two drifts point at each other and the solution
// sits at b for the rest of the cell.
inline double refracted_flow(double u, double dt, double ekdt, double mu, double k, double b) {
    if (k == 0.0) return u + mu * dt;
    const double mean = mu / k;
    if (u > b) {
        if (mean >= b) return mean + (u - mean) * ekdt;
        const double tc = std::log((u - mean) / (b - mean)) / k;
        if (tc >= dt) return mean + (u - mean) * ekdt;
        return (mu > 0.0) ? b : b + mu * (dt - tc);
    }
    if (mu <= 0.0) return u + mu * dt;
    const double tc = (b - u) / mu;
    if (tc >= dt) return u + mu * dt;
    if (mean > b) return mean + (b - mean) * std::exp(-k * (dt - tc));
    return b;
}

struct Stepper {
    double mu, k, b, sig_sqrt_h, h, ekh;
    bool piecewise;

    double operator()(double u, double z) const {
        if (piecewise) return refracted_flow(u, h, ekh, mu, k, b) + sig_sqrt_h * z;
        const double drift = mu - ((u > b) ? k * u : 0.0);
        return u + drift * h + sig_sqrt_h * z;
    }
};

inline Stepper make_stepper(const ModelParams& m, const ControlParams& c, double b,
                            const SimConfig& cfg) {
    return Stepper{m.mu, c.k, b, m.sigma * std::sqrt(cfg.step), cfg.step,
                   std::exp(-c.k * cfg.step), cfg.scheme == Scheme::PiecewiseNoise};
}

// Brownian-bridge crossing exponent 2 d0 d1 / (sigma^2 h); crossing
// probability exp(-e). Exponents above 45 (p < 3e-20) skip the draw so the
// uniform stream is consumed only near a barrier.
constexpr double kBridgeCutoff = 45.0;

template <typename F>
double pairwise_sum(std::uint64_t i0, std::uint64_t n, const F& f) {
    if (n <= 64) {
        double s = 0.0;
        for (std::uint64_t i = 0; i < n; ++i) s += f(i0 + i);
        return s;
    }
    const std::uint64_t half = n / 2;
    return pairwise_sum(i0, half, f) + pairwise_sum(i0 + half, n - half, f);
}

template <typename RangeFn>
void run_parallel(std::uint64_t n, const RangeFn& body) {
    const unsigned workers =
        std::max<std::uint64_t>(1, std::min<std::uint64_t>(worker_count(), n / 512 + 1));
    if (workers == 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::uint64_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::uint64_t lo = std::min<std::uint64_t>(n, w * chunk);
        const std::uint64_t hi = std::min<std::uint64_t>(n, lo + chunk);
        if (lo < hi) pool.emplace_back([&, lo, hi] { body(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

// Runs per_path over all path indices and reduces mean / standard error.
template <typename PathFn>
McEstimate reduce_paths(const SimConfig& cfg, const PathFn& per_path) {
    std::vector<double> vals(cfg.paths);
    run_parallel(cfg.paths, [&](std::uint64_t lo, std::uint64_t hi) {
        for (std::uint64_t p = lo; p < hi; ++p) {
            rng::PathRng r(cfg.seed, p);
            vals[p] = per_path(r);
        }
    });
    McEstimate est;
    est.n = cfg.paths;
    est.scheme = cfg.scheme;
    est.step = cfg.step;
    est.mean = pairwise_sum(0, cfg.paths, [&](std::uint64_t i) { return vals[i]; }) /
               static_cast<double>(cfg.paths);
    if (cfg.paths > 1) {
        const double m = est.mean;
        const double ss = pairwise_sum(0, cfg.paths, [&](std::uint64_t i) {
            const double d = vals[i] - m;
            return d * d;
        });
        est.std_error = std::sqrt(ss / (static_cast<double>(cfg.paths) - 1.0) /
                                  static_cast<double>(cfg.paths));
    } else {
        est.std_error = std::numeric_limits<double>::quiet_NaN();
    }
    return est;
}

inline std::uint64_t step_count(const SimConfig& cfg) {
    const double n = std::llround(cfg.horizon / cfg.step);
    return static_cast<std::uint64_t>(std::max(1.0, n));
}

}  // namespace detail

// One discrete path of the refracted diffusion, recorded at the grid times
// until the stop rule (ruin / level passage / horizon) triggers. Passage
// between grid points is sampled from the bridge law; the recorded stop time
// is then the end of the straddling step. b may be any real or
// kAlwaysRefract; path_index selects an independent path under the same
// master seed.
inline SimPath simulate_path(const ModelParams& m, const ControlParams& c, double b,
                             double x0, const SimConfig& cfg, const StopSpec& stop,
                             std::uint64_t path_index = 0) {
    require_model(m);
    require_control(c, /*allow_zero_k=*/true);
    detail::validate_config(cfg);
    if (stop.level && !std::isfinite(*stop.level))
        throw ConfigError("simulate_path: stopping level must be finite");
    if (std::isnan(b)) throw ConfigError("simulate_path: barrier must not be NaN");

    const auto step = detail::make_stepper(m, c, b, cfg);
    const double inv_sig2h = 1.0 / (m.sigma * m.sigma * cfg.step);
    const std::uint64_t nsteps = detail::step_count(cfg);
    const bool level_from_below = stop.level && x0 < *stop.level;

    SimPath out;
    out.times.reserve(nsteps + 1);
    out.states.reserve(nsteps + 1);
    out.times.push_back(0.0);
    out.states.push_back(x0);

    rng::PathRng r(cfg.seed, path_index);
    double u = x0;
    if (stop.on_ruin && u < 0.0) {
        out.cause = StopCause::Ruin;
        return out;
    }
    if (stop.level && ((level_from_below && u >= *stop.level) ||
                       (!level_from_below && u <= *stop.level))) {
        out.cause = StopCause::Level;
        return out;
    }

    for (std::uint64_t i = 1; i <= nsteps; ++i) {
        const double un = step(u, r.normal());
        out.times.push_back(static_cast<double>(i) * cfg.step);
        out.states.push_back(un);

        if (stop.on_ruin && un < 0.0) {
            out.cause = StopCause::Ruin;
            return out;
        }
        if (stop.level) {
            const double a = *stop.level;
            if ((level_from_below && un >= a) || (!level_from_below && un <= a)) {
                out.cause = StopCause::Level;
                return out;
            }
        }
        // Bridge passage checks, nearest rule first.
        if (stop.on_ruin || stop.level) {
            double e_ruin = std::numeric_limits<double>::infinity();
            double e_level = std::numeric_limits<double>::infinity();
            if (stop.on_ruin && u > 0.0 && un > 0.0) e_ruin = 2.0 * u * un * inv_sig2h;
            if (stop.level) {
                const double a = *stop.level;
                e_level = 2.0 * (u - a) * (un - a) * inv_sig2h;
            }
            if (e_ruin < detail::kBridgeCutoff || e_level < detail::kBridgeCutoff) {
                const double p_ruin = e_ruin < detail::kBridgeCutoff ? std::exp(-e_ruin) : 0.0;
                const double p_level = e_level < detail::kBridgeCutoff ? std::exp(-e_level) : 0.0;
                const double v = r.uniform_co();
                if (v < p_ruin) {
                    out.cause = StopCause::Ruin;
                    return out;
                }
                if (v < p_ruin + p_level) {
                    out.cause = StopCause::Level;
                    return out;
                }
            }
        }
        u = un;
    }
    out.cause = StopCause::Horizon;
    return out;
}

// Monte Carlo estimate of one of the four path functionals. The discounted
// integrals use the trapezoidal rule on the grid samples; passage times are
// bridge-corrected as in simulate_path.
inline McEstimate estimate(const ModelParams& m, const ControlParams& c,
                           const PathFunctionalSpec& spec, double b, const SimConfig& cfg) {
    require_model(m);
    require_control(c, /*allow_zero_k=*/true);
    detail::validate_config(cfg);

    const double h = cfg.step;
    const double edh = std::exp(-c.q * h);
    const double inv_sig2h = 1.0 / (m.sigma * m.sigma * h);
    const std::uint64_t nsteps = detail::step_count(cfg);
    if (!(c.q > 0.0)) throw ConfigError("estimate: require q > 0");

    switch (spec.kind) {
        case FunctionalKind::DiscountedDividends: {
            if (!(b >= 0.0)) throw ConfigError("DiscountedDividends: require b >= 0");
            const auto step = detail::make_stepper(m, c, b, cfg);
            const double x0 = spec.x0;
            const double k = c.k;
            return detail::reduce_paths(cfg, [&, x0, k](rng::PathRng& r) {
                double u = x0;
                if (u <= 0.0) return 0.0;  // ruin is immediate from the boundary
                double disc = 1.0;
                double acc = 0.0;
                double f_prev = (u > b) ? k * u : 0.0;
                for (std::uint64_t i = 0; i < nsteps; ++i) {
                    const double un = step(u, r.normal());
                    disc *= edh;
                    if (un < 0.0) {
                        acc += f_prev;  // payout rate hits zero at ruin
                        break;
                    }
                    const double f_cur = (un > b) ? disc * k * un : 0.0;
                    acc += f_prev + f_cur;
                    f_prev = f_cur;
                    const double e = 2.0 * u * un * inv_sig2h;
                    if (e < detail::kBridgeCutoff && r.uniform_co() < std::exp(-e)) break;
                    u = un;
                }
                return 0.5 * h * acc;
            });
        }
        case FunctionalKind::FirstPassageLaplace: {
            if (!(c.k > 0.0)) throw ConfigError("FirstPassageLaplace: require k > 0");
            if (!std::isfinite(spec.level) || !(spec.level < spec.x0))
                throw ConfigError("FirstPassageLaplace: require level a < x0");
            const auto step = detail::make_stepper(m, c, kAlwaysRefract, cfg);
            const double a = spec.level;
            const double x0 = spec.x0;
            return detail::reduce_paths(cfg, [&, a, x0](rng::PathRng& r) {
                double u = x0;
                double disc = 1.0;
                for (std::uint64_t i = 0; i < nsteps; ++i) {
                    const double un = step(u, r.normal());
                    disc *= edh;
                    if (un <= a) return disc;
                    const double e = 2.0 * (u - a) * (un - a) * inv_sig2h;
                    if (e < detail::kBridgeCutoff && r.uniform_co() < std::exp(-e)) return disc;
                    u = un;
                }
                return 0.0;  // horizon truncation; e^{-qT} bias bounded by config
            });
        }
        case FunctionalKind::TwoSidedExit: {
            if (!std::isfinite(spec.level) || !(spec.level > 0.0))
                throw ConfigError("TwoSidedExit: require level a > 0");
            if (!(spec.x0 >= 0.0) || !(spec.x0 <= spec.level))
                throw ConfigError("TwoSidedExit: require 0 <= x0 <= a");
            const double a = spec.level;
            const double x0 = spec.x0;
            const double mu_h = m.mu * h;
            const double sig_sqrt_h = m.sigma * std::sqrt(h);
            if (x0 >= a) {
                McEstimate unit;
                unit.mean = 1.0;
                unit.std_error = cfg.paths > 1 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
                unit.n = cfg.paths;
                unit.scheme = cfg.scheme;
                unit.step = cfg.step;
                return unit;
            }
            return detail::reduce_paths(cfg, [&, a, x0](rng::PathRng& r) {
                double u = x0;
                if (u <= 0.0) return 0.0;
                double disc = 1.0;
                for (std::uint64_t i = 0; i < nsteps; ++i) {
                    const double un = u + mu_h + sig_sqrt_h * r.normal();
                    disc *= edh;
                    if (un >= a) return disc;
                    if (un <= 0.0) return 0.0;
                    const double e_up = 2.0 * (a - u) * (a - un) * inv_sig2h;
                    const double e_dn = 2.0 * u * un * inv_sig2h;
                    if (e_up < detail::kBridgeCutoff || e_dn < detail::kBridgeCutoff) {
                        const double p_up = e_up < detail::kBridgeCutoff ? std::exp(-e_up) : 0.0;
                        const double p_dn = e_dn < detail::kBridgeCutoff ? std::exp(-e_dn) : 0.0;
                        const double v = r.uniform_co();
                        if (v < p_up) return disc;
                        if (v < p_up + p_dn) return 0.0;
                    }
                    u = un;
                }
                return 0.0;
            });
        }
        case FunctionalKind::DiscountedLinearOU: {
            const auto step = detail::make_stepper(m, c, kAlwaysRefract, cfg);
            const double x0 = spec.x0;
            return detail::reduce_paths(cfg, [&, x0](rng::PathRng& r) {
                double u = x0;
                double disc = 1.0;
                double acc = 0.0;
                double f_prev = u;
                for (std::uint64_t i = 0; i < nsteps; ++i) {
                    u = step(u, r.normal());
                    disc *= edh;
                    const double f_cur = disc * u;
                    acc += f_prev + f_cur;
                    f_prev = f_cur;
                }
                return 0.5 * h * acc;
            });
        }
    }
    throw ConfigError("estimate: unknown functional kind");
}

struct MeshDistance {
    double mesh = 0.0;
    double mean_sup = 0.0;  // E sup_t |U^{mesh} - U^{finest}|
};

// Strong-approximation diagnostic: couples every mesh to the finest one
// through the same dyadically refined Brownian increments and reports the
// mean sup-distance to the finest path, one row per coarser mesh.
inline std::vector<MeshDistance> strong_convergence_check(
    const ModelParams& m, const ControlParams& c, double b, double x0, double horizon,
    const std::vector<double>& mesh_list, std::uint64_t paths, std::uint64_t seed,
    Scheme scheme = Scheme::PiecewiseNoise) {
    require_model(m);
    require_control(c, /*allow_zero_k=*/true);
    if (mesh_list.size() < 2) throw ConfigError("strong_convergence_check: need >= 2 meshes");
    for (std::size_t i = 1; i < mesh_list.size(); ++i)
        if (!(mesh_list[i] < mesh_list[i - 1]))
            throw ConfigError("strong_convergence_check: mesh_list must be decreasing");
    const double hf = mesh_list.back();
    if (!(hf > 0.0) || !(horizon >= hf))
        throw ConfigError("strong_convergence_check: bad finest mesh / horizon");

    std::vector<std::uint64_t> ratios;  // coarse cell = ratio fine cells
    for (double hm : mesh_list) {
        const double ratio = hm / hf;
        const auto r = static_cast<std::uint64_t>(std::llround(ratio));
        if (r < 1 || std::abs(ratio - static_cast<double>(r)) > 1e-9 || (r & (r - 1)) != 0)
            throw ConfigError("strong_convergence_check: meshes must refine dyadically");
        ratios.push_back(r);
    }
    const auto n_fine = static_cast<std::uint64_t>(std::llround(horizon / hf));
    if (n_fine < 1 || std::abs(horizon / hf - static_cast<double>(n_fine)) > 1e-6)
        throw ConfigError("strong_convergence_check: horizon must be a multiple of the finest mesh");

    const std::size_t n_coarse = mesh_list.size() - 1;
    std::vector<std::vector<double>> sups(n_coarse, std::vector<double>(paths, 0.0));

    detail::run_parallel(paths, [&](std::uint64_t lo, std::uint64_t hi) {
        std::vector<double> z(n_fine);
        std::vector<double> fine_path(n_fine + 1);
        const double sig_sqrt_hf = m.sigma * std::sqrt(hf);
        const double ekhf = std::exp(-c.k * hf);
        for (std::uint64_t p = lo; p < hi; ++p) {
            rng::PathRng r(seed, p);
            for (std::uint64_t i = 0; i < n_fine; ++i) z[i] = r.normal();

            fine_path[0] = x0;
            for (std::uint64_t i = 0; i < n_fine; ++i) {
                const double noise = sig_sqrt_hf * z[i];
                if (scheme == Scheme::PiecewiseNoise)
                    fine_path[i + 1] =
                        detail::refracted_flow(fine_path[i], hf, ekhf, m.mu, c.k, b) + noise;
                else
                    fine_path[i + 1] =
                        fine_path[i] +
                        (m.mu - ((fine_path[i] > b) ? c.k * fine_path[i] : 0.0)) * hf + noise;
            }

            for (std::size_t mi = 0; mi < n_coarse; ++mi) {
                const std::uint64_t ratio = ratios[mi];
                const double hm = mesh_list[mi];
                const double ekhm = std::exp(-c.k * hm);
                const std::uint64_t n_steps = n_fine / ratio;
                double u = x0;
                double sup = 0.0;
                for (std::uint64_t i = 0; i < n_steps; ++i) {
                    double dz = 0.0;
                    for (std::uint64_t j = 0; j < ratio; ++j) dz += z[i * ratio + j];
                    const double noise = m.sigma * std::sqrt(hf) * dz;
                    if (scheme == Scheme::PiecewiseNoise)
                        u = detail::refracted_flow(u, hm, ekhm, m.mu, c.k, b) + noise;
                    else
                        u = u + (m.mu - ((u > b) ? c.k * u : 0.0)) * hm + noise;
                    sup = std::max(sup, std::abs(u - fine_path[(i + 1) * ratio]));
                }
                sups[mi][p] = sup;
            }
        }
    });

    std::vector<MeshDistance> table;
    for (std::size_t mi = 0; mi < n_coarse; ++mi) {
        const double mean =
            detail::pairwise_sum(0, paths, [&](std::uint64_t i) { return sups[mi][i]; }) /
            static_cast<double>(paths);
        table.push_back({mesh_list[mi], mean});
    }
    return table;
}

}  // namespace dcl
