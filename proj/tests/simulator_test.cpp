#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "dcl/optimizer.hpp"
#include "dcl/simulator.hpp"
#include "dcl/valuation.hpp"

using namespace dcl;

namespace {
const ModelParams kM{0.3, 4.5};

double zscore(const McEstimate& e, double target) {
    return (e.mean - target) / e.std_error;
}
}  // namespace

TEST_CASE("normal sampler moments and tail mass") {
    rng::PathRng r(99, 0);
    const long n = 400000;
    double s1 = 0, s2 = 0, s4 = 0;
    long tail = 0;
    for (long i = 0; i < n; ++i) {
        const double z = r.normal();
        s1 += z;
        s2 += z * z;
        s4 += z * z * z * z;
        if (std::abs(z) > 3.0) ++tail;
    }
    CHECK(std::abs(s1 / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.01);
    CHECK(std::abs(s4 / n - 3.0) < 0.05);
    // P(|Z| > 3) = 0.0026998
    CHECK(std::abs(static_cast<double>(tail) / n - 0.0026998) < 5e-4);
}

TEST_CASE("K = 0 reduces to Brownian motion with drift") {
    const ControlParams c{0.05, 0.0};
    const SimConfig cfg{0.01, 1.0, 20000, 42, Scheme::EulerMaruyama};
    double s = 0, s2 = 0;
    for (std::uint64_t p = 0; p < cfg.paths; ++p) {
        const double uT = simulate_path(kM, c, 0.0, 2.0, cfg, {}, p).states.back();
        s += uT;
        s2 += uT * uT;
    }
    const double mean = s / cfg.paths;
    const double se = std::sqrt((s2 / cfg.paths - mean * mean) / cfg.paths);
    CHECK(std::abs(mean - (2.0 + 0.3 * 1.0)) < 4.0 * se);
}

TEST_CASE("unrefracted OU matches the exponential mean decay") {
    const ControlParams c{0.05, 0.5};
    const SimConfig cfg{0.01, 2.0, 20000, 7, Scheme::PiecewiseNoise};
    double s = 0, s2 = 0;
    for (std::uint64_t p = 0; p < cfg.paths; ++p) {
        const double uT = simulate_path(kM, c, kAlwaysRefract, 3.0, cfg, {}, p).states.back();
        s += uT;
        s2 += uT * uT;
    }
    const double mean = s / cfg.paths;
    const double want = 3.0 * std::exp(-0.5 * 2.0) + (0.3 / 0.5) * (1.0 - std::exp(-0.5 * 2.0));
    const double se = std::sqrt((s2 / cfg.paths - mean * mean) / cfg.paths);
    CHECK(std::abs(mean - want) < 4.0 * se);
}

TEST_CASE("vanishing noise gives the deterministic barrier crossing time") {
    const ModelParams tiny{0.3, 1e-3};
    const ControlParams c{0.05, 0.1};
    const SimConfig cfg{1e-3, 10.0, 1, 5, Scheme::EulerMaruyama};
    StopSpec stop;
    stop.level = 2.0;
    const SimPath path = simulate_path(tiny, c, 5.0, 1.0, cfg, stop);
    REQUIRE(path.cause == StopCause::Level);
    // dU = mu dt below the barrier: crossing at (2 - 1)/0.3.
    CHECK(std::abs(path.times.back() - (2.0 - 1.0) / 0.3) < 0.01);
}

TEST_CASE("identical configuration reproduces bit-identical estimates") {
    const ControlParams c{0.05, 0.1};
    const SimConfig cfg{5e-3, 50.0, 4000, 2024, Scheme::EulerMaruyama};
    const PathFunctionalSpec spec{FunctionalKind::DiscountedDividends, 3.0};
    const McEstimate a = estimate(kM, c, spec, 1.0, cfg);
    const McEstimate b = estimate(kM, c, spec, 1.0, cfg);
    CHECK(a.mean == b.mean);
    CHECK(a.std_error == b.std_error);
    CHECK(a.n == cfg.paths);
}

TEST_CASE("estimates are independent of the worker count") {
    const ControlParams c{0.05, 0.1};
    const SimConfig cfg{5e-3, 50.0, 6000, 77, Scheme::EulerMaruyama};
    const PathFunctionalSpec spec{FunctionalKind::DiscountedDividends, 3.0};

    setenv("DCL_THREADS", "1", 1);
    const McEstimate one = estimate(kM, c, spec, 1.0, cfg);
    setenv("DCL_THREADS", "5", 1);
    const McEstimate five = estimate(kM, c, spec, 1.0, cfg);
    unsetenv("DCL_THREADS");
    CHECK(one.mean == five.mean);
    CHECK(one.std_error == five.std_error);
}

TEST_CASE("two-sided exit agrees with the W ratio") {
    const ControlParams c{0.05, 0.1};
    const SimConfig cfg{1e-3, 60.0, 30000, 2024, Scheme::EulerMaruyama};
    const McEstimate est = estimate(kM, c, {FunctionalKind::TwoSidedExit, 2.0, 5.0}, 0.0, cfg);
    const double target = 0.4107341319224617;  // W(2)/W(5) at q = 0.05
    CHECK(std::abs(zscore(est, target)) < 4.0);
}

TEST_CASE("OU first passage agrees with the H ratio") {
    const ControlParams c{0.05, 0.1};
    const SimConfig cfg{2e-3, 150.0, 30000, 2025, Scheme::EulerMaruyama};
    const McEstimate est =
        estimate(kM, c, {FunctionalKind::FirstPassageLaplace, 3.0, 1.0}, 0.0, cfg);
    const ScaleEval h3 = h_func(3.0, kM, c);
    const ScaleEval h1 = h_func(1.0, kM, c);
    CHECK(std::abs(zscore(est, h3.value / h1.value)) < 4.0);
}

TEST_CASE("discounted linear OU integral agrees with (x0 + mu/q)/(q+K)") {
    const ControlParams c{0.05, 0.1};
    const SimConfig cfg{2e-3, 150.0, 20000, 2026, Scheme::PiecewiseNoise};
    const McEstimate est = estimate(kM, c, {FunctionalKind::DiscountedLinearOU, 3.0}, 0.0, cfg);
    CHECK(std::abs(zscore(est, 60.0)) < 4.0);
}

TEST_CASE("discounted dividends agree with the closed-form value") {
    const ControlParams c{0.05, 0.1};
    const auto rep = make_value_function(1.0, kM, c);
    const double target = value(2.0, rep);
    const SimConfig cfg{5e-3, 160.0, 30000, 2027, Scheme::EulerMaruyama};
    const McEstimate est = estimate(kM, c, {FunctionalKind::DiscountedDividends, 2.0}, 1.0, cfg);
    CHECK(std::abs(zscore(est, target)) < 4.0);
}

TEST_CASE("both schemes estimate the same value within combined error") {
    const ControlParams c{0.05, 0.1};
    const PathFunctionalSpec spec{FunctionalKind::DiscountedDividends, 2.0};
    SimConfig cfg{1e-3, 150.0, 20000, 404, Scheme::EulerMaruyama};
    const McEstimate em = estimate(kM, c, spec, 1.0, cfg);
    cfg.scheme = Scheme::PiecewiseNoise;
    const McEstimate pn = estimate(kM, c, spec, 1.0, cfg);
    const double comb = std::hypot(em.std_error, pn.std_error);
    CHECK(std::abs(em.mean - pn.mean) <= 3.0 * comb);
}

TEST_CASE("schemes produce identical paths when the refraction term is off") {
    const SimConfig em{0.01, 5.0, 1, 9, Scheme::EulerMaruyama};
    SimConfig pn = em;
    pn.scheme = Scheme::PiecewiseNoise;

    SECTION("K = 0") {
        const ControlParams c{0.05, 0.0};
        for (std::uint64_t p = 0; p < 40; ++p) {
            const SimPath a = simulate_path(kM, c, 1.0, 2.0, em, {}, p);
            const SimPath b = simulate_path(kM, c, 1.0, 2.0, pn, {}, p);
            REQUIRE(a.states.size() == b.states.size());
            for (std::size_t i = 0; i < a.states.size(); ++i) CHECK(a.states[i] == b.states[i]);
        }
    }
    SECTION("barrier far above the sampled range") {
        const ControlParams c{0.05, 0.4};
        const double far_b = 2.0 + 10.0 * kM.sigma * std::sqrt(5.0) + 100.0;
        for (std::uint64_t p = 0; p < 40; ++p) {
            const SimPath a = simulate_path(kM, c, far_b, 2.0, em, {}, p);
            const SimPath b = simulate_path(kM, c, far_b, 2.0, pn, {}, p);
            for (std::size_t i = 0; i < a.states.size(); ++i) CHECK(a.states[i] == b.states[i]);
        }
    }
}

TEST_CASE("coupled meshes contract toward the finest path") {
    const ControlParams c{0.05, 0.1};
    const std::vector<double> meshes{0.1, 0.05, 0.025, 0.0125};
    const auto table = strong_convergence_check(kM, c, 1.0, 2.0, 10.0, meshes, 2000, 31);
    REQUIRE(table.size() == 3);
    CHECK(table[0].mean_sup > table[1].mean_sup);
    CHECK(table[1].mean_sup > table[2].mean_sup);
    CHECK(table[2].mean_sup < 0.05);  // finest coupled pair stays tight

    // No refraction: every mesh reproduces the same Gaussian increments and
    // only summation order separates the paths.
    const ControlParams c0{0.05, 0.0};
    const auto zero = strong_convergence_check(kM, c0, 1.0, 2.0, 10.0, meshes, 200, 31);
    for (const auto& row : zero) CHECK(row.mean_sup < 1e-10);
}

TEST_CASE("ruin frequency grows with the horizon under negative drift") {
    const ModelParams m{-0.2, 1.0};
    const ControlParams c{0.05, 0.0};
    StopSpec stop;
    stop.on_ruin = true;
    double prev = -1.0;
    for (double T : {1.0, 2.0, 4.0, 8.0}) {
        const SimConfig cfg{0.01, T, 2000, 11, Scheme::EulerMaruyama};
        int ruined = 0;
        for (std::uint64_t p = 0; p < cfg.paths; ++p)
            ruined += simulate_path(m, c, 0.0, 1.0, cfg, stop, p).cause == StopCause::Ruin;
        // Same seeds and step: longer horizons extend the same paths, so the
        // ruined set can only grow.
        CHECK(ruined >= prev);
        prev = ruined;
    }
    CHECK(prev > 0);
}

TEST_CASE("degenerate sample and start-at-ruin behavior") {
    const ControlParams c{0.05, 0.1};
    const SimConfig one{1e-2, 10.0, 1, 3, Scheme::EulerMaruyama};
    const McEstimate e1 = estimate(kM, c, {FunctionalKind::DiscountedDividends, 3.0}, 1.0, one);
    CHECK(e1.n == 1);
    CHECK(std::isnan(e1.std_error));

    const SimConfig cfg{1e-2, 10.0, 64, 3, Scheme::EulerMaruyama};
    const McEstimate ruined =
        estimate(kM, c, {FunctionalKind::DiscountedDividends, 0.0}, 1.0, cfg);
    CHECK(ruined.mean == 0.0);  // bridge fires immediately from the boundary
}

TEST_CASE("configuration validation") {
    const ControlParams c{0.05, 0.1};
    SimConfig cfg{1e-2, 10.0, 100, 3, Scheme::EulerMaruyama};

    SimConfig bad = cfg;
    bad.step = 0.0;
    CHECK_THROWS_AS(estimate(kM, c, {FunctionalKind::DiscountedDividends, 1.0}, 0.0, bad),
                    ConfigError);
    bad = cfg;
    bad.horizon = 1e-3;
    CHECK_THROWS_AS(estimate(kM, c, {FunctionalKind::DiscountedDividends, 1.0}, 0.0, bad),
                    ConfigError);
    bad = cfg;
    bad.paths = 0;
    CHECK_THROWS_AS(estimate(kM, c, {FunctionalKind::DiscountedDividends, 1.0}, 0.0, bad),
                    ConfigError);

    // Kind-parameter consistency.
    CHECK_THROWS_AS(estimate(kM, c, {FunctionalKind::FirstPassageLaplace, 1.0, 3.0}, 0.0, cfg),
                    ConfigError);  // a >= x0
    CHECK_THROWS_AS(estimate(kM, ControlParams{0.05, 0.0},
                             {FunctionalKind::FirstPassageLaplace, 3.0, 1.0}, 0.0, cfg),
                    ConfigError);  // OU passage needs k > 0
    CHECK_THROWS_AS(estimate(kM, c, {FunctionalKind::TwoSidedExit, -1.0, 5.0}, 0.0, cfg),
                    ConfigError);
    CHECK_THROWS_AS(estimate(kM, c, {FunctionalKind::TwoSidedExit, 2.0, -5.0}, 0.0, cfg),
                    ConfigError);
    CHECK_THROWS_AS(estimate(kM, c, {FunctionalKind::DiscountedDividends, 1.0}, -2.0, cfg),
                    ConfigError);

    StopSpec bad_stop;
    bad_stop.level = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(simulate_path(kM, c, 0.0, 1.0, cfg, bad_stop), ConfigError);
}

TEST_CASE("high-variance warning predicate") {
    McEstimate e;
    e.mean = 10.0;
    e.std_error = 0.4;
    CHECK_FALSE(high_variance(e));
    e.std_error = 0.6;
    CHECK(high_variance(e));
    e.std_error = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(high_variance(e));
}
