// dcl: solve, value, verify, and simulate delayed linear payout strategies
// for a Brownian surplus model.
//
// Subcommands: value-curve, value-surface, barrier-curve, verify, simulate.
// Curve commands emit CSV (or JSON with --format json); verify and simulate
// emit JSON. Every output embeds the fully resolved configuration and is
// byte-reproducible for a fixed configuration. Exit codes: 0 success,
// 2 validation error, 3 numerical/accuracy failure, 4 I/O error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dcl/model.hpp"
#include "dcl/optimizer.hpp"
#include "dcl/simulator.hpp"
#include "dcl/specfun.hpp"
#include "dcl/valuation.hpp"

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct CheckFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Presets: the built-in parameter sets the experiments default to.

struct Preset {
    double mu, sigma, q, k, x0;
};

const std::map<std::string, Preset>& presets() {
    static const std::map<std::string, Preset> table = {
        {"fig1-top", {0.3, 4.5, 0.025, 0.1, 4.60}},
        {"fig1-bottom", {0.3, 4.5, 0.05, 0.1, 4.60}},
        {"fig2", {0.3, 2.5, 0.07, 0.1, 1.0}},
        {"fig3", {0.3, 4.5, 0.07, 0.1, 1.0}},
        {"remark", {0.3, 4.5, 0.05, 0.35, 1.0}},
    };
    return table;
}

// ---------------------------------------------------------------------------
// Option bundle shared by the subcommands. Presets fill whatever the command
// line (or config file) left untouched.

struct CommonOpts {
    std::string preset;
    double mu = 0, sigma = 0, q = 0, k = 0, x0 = 0, b = 0;
    std::string out_path;
    std::string format;
    std::uint64_t paths = 0, seed = 42;
    double step = 0, horizon = 0, level = 0;
    std::string scheme = "euler";
    double gb_min = 0, gb_max = -1, gk_min = 0, gk_max = -1;
    int gb_count = 0, gk_count = 0, gx_count = 0;
    bool gk_log = false;

    CLI::Option* o_mu = nullptr;
    CLI::Option* o_sigma = nullptr;
    CLI::Option* o_q = nullptr;
    CLI::Option* o_k = nullptr;
    CLI::Option* o_x0 = nullptr;
    CLI::Option* o_b = nullptr;
    CLI::Option* o_horizon = nullptr;
    CLI::Option* o_level = nullptr;
    CLI::Option* o_gb_max = nullptr;
};

void add_model_flags(CLI::App* cmd, CommonOpts& o, const std::string& default_preset) {
    o.preset = default_preset;
    cmd->add_option("--preset", o.preset, "Built-in parameter set")
        ->check(CLI::IsMember({"fig1-top", "fig1-bottom", "fig2", "fig3", "remark"}))
        ->capture_default_str();
    o.o_mu = cmd->add_option("--mu", o.mu, "Drift of the uncontrolled surplus");
    o.o_sigma = cmd->add_option("--sigma", o.sigma, "Volatility (> 0)");
    o.o_q = cmd->add_option("--q", o.q, "Discount rate (> 0)");
    o.o_k = cmd->add_option("--k", o.k, "Maximal linear payout rate factor (> 0)");
    o.o_x0 = cmd->add_option("--x0", o.x0, "Initial surplus");
    cmd->add_option("--out", o.out_path, "Output file (stdout when omitted)");
}

void resolve_preset(CommonOpts& o) {
    const Preset& p = presets().at(o.preset);
    if (!o.o_mu->count()) o.mu = p.mu;
    if (!o.o_sigma->count()) o.sigma = p.sigma;
    if (!o.o_q->count()) o.q = p.q;
    if (!o.o_k->count()) o.k = p.k;
    if (o.o_x0 && !o.o_x0->count()) o.x0 = p.x0;
}

dcl::Scheme parse_scheme(const std::string& s) {
    if (s == "euler") return dcl::Scheme::EulerMaruyama;
    if (s == "piecewise") return dcl::Scheme::PiecewiseNoise;
    throw dcl::ConfigError("unknown scheme: " + s);
}

std::vector<double> make_grid(double lo, double hi, int count, bool log_spaced,
                              const std::string& what) {
    if (count < 1) throw dcl::ConfigError(what + ": grid count must be >= 1");
    if (count == 1) {
        if (lo != hi) throw dcl::ConfigError(what + ": single-point grid needs min == max");
        return {lo};
    }
    if (!(lo < hi)) throw dcl::ConfigError(what + ": grid range is empty or reversed");
    std::vector<double> g(count);
    if (log_spaced) {
        if (!(lo > 0.0)) throw dcl::ConfigError(what + ": log grid needs min > 0");
        const double r = std::log(hi / lo);
        for (int i = 0; i < count; ++i)
            g[i] = lo * std::exp(r * static_cast<double>(i) / (count - 1));
    } else {
        for (int i = 0; i < count; ++i)
            g[i] = lo + (hi - lo) * static_cast<double>(i) / (count - 1);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Output plumbing.

using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

void write_stream(const std::string& out_path, const std::string& payload) {
    if (out_path.empty()) {
        std::cout << payload;
        return;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw std::ios_base::failure("cannot open output file: " + out_path);
    f << payload;
    if (!f) throw std::ios_base::failure("write failed: " + out_path);
}

std::string render_csv(const std::string& command, const ConfigEcho& echo,
                       const std::vector<std::string>& cols,
                       const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream os;
    os << "# dcl " << command << "\n";
    for (const auto& [k, v] : echo) os << "# " << k << " = " << v << "\n";
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << "\n";
    }
    return os.str();
}

std::string render_rows_json(const std::string& command, const ConfigEcho& echo,
                             const std::vector<std::string>& cols,
                             const std::vector<std::vector<std::string>>& rows) {
    ordered_json j;
    j["command"] = command;
    ordered_json cfg;
    for (const auto& [k, v] : echo) cfg[k] = v;
    j["config"] = cfg;
    j["columns"] = cols;
    ordered_json out_rows = ordered_json::array();
    for (const auto& row : rows) {
        ordered_json r = ordered_json::array();
        for (const auto& cell : row) {
            try {
                std::size_t pos = 0;
                const double d = std::stod(cell, &pos);
                if (pos == cell.size()) {
                    r.push_back(d);
                    continue;
                }
            } catch (...) {
            }
            r.push_back(cell);
        }
        out_rows.push_back(r);
    }
    j["rows"] = out_rows;
    return j.dump(2) + "\n";
}

void emit_table(const CommonOpts& o, const std::string& command, const ConfigEcho& echo,
                const std::vector<std::string>& cols,
                const std::vector<std::vector<std::string>>& rows) {
    const std::string payload = (o.format == "json")
                                    ? render_rows_json(command, echo, cols, rows)
                                    : render_csv(command, echo, cols, rows);
    write_stream(o.out_path, payload);
}

ConfigEcho model_echo(const CommonOpts& o) {
    return {{"preset", o.preset},
            {"mu", fmt12(o.mu)},
            {"sigma", fmt12(o.sigma)},
            {"q", fmt12(o.q)},
            {"k", fmt12(o.k)}};
}

// Horizon for the discounted functionals: push the deterministic truncation
// bound e^{-qT} * scale below 10% of the predicted standard error and below
// 1e-4 of the estimate scale, whichever is longer.
double auto_horizon(double q, double scale, double target, std::uint64_t paths, double step) {
    const double floor_target = std::max(std::abs(target), 0.05);
    const double se_guess = floor_target / std::sqrt(static_cast<double>(paths));
    const double s = std::max(scale, 1.0);
    const double t_se = std::log(s / (0.1 * se_guess)) / q;
    const double t_abs = std::log(s / (1e-4 * floor_target)) / q;
    return std::max({t_se, t_abs, 50.0 * step, 10.0});
}

// ---------------------------------------------------------------------------
// value-curve: rows (b, v_b(x0)) plus the optimum marker row.

int run_value_curve(CommonOpts& o) {
    resolve_preset(o);
    const dcl::ModelParams m{o.mu, o.sigma};
    const dcl::ControlParams c{o.q, o.k};
    dcl::require_model(m);
    dcl::require_control(c);

    const dcl::RegimeDecision dec = dcl::solve_b_star(m, c);
    const double gb_max = o.o_gb_max->count() ? o.gb_max : dec.c_star;
    const std::vector<double> grid = make_grid(o.gb_min, gb_max, o.gb_count, false, "b grid");

    std::vector<std::vector<std::string>> rows;
    for (double b : grid) {
        const double v = dcl::value(o.x0, dcl::make_value_function(b, m, c));
        rows.push_back({fmt12(b), fmt12(v), "0"});
    }
    const double v_opt = dcl::value(o.x0, dcl::make_value_function(dec.b_star, m, c));
    rows.push_back({fmt12(dec.b_star), fmt12(v_opt), "1"});

    ConfigEcho echo = model_echo(o);
    echo.emplace_back("x0", fmt12(o.x0));
    echo.emplace_back("grid_b",
                      fmt12(o.gb_min) + ":" + fmt12(gb_max) + ":" + std::to_string(o.gb_count));
    echo.emplace_back("b_star", fmt12(dec.b_star));
    echo.emplace_back("regime", dec.regime == dcl::Regime::LinearAtZero ? "linear-at-zero"
                                                                        : "delayed-at-b-star");
    emit_table(o, "value-curve", echo, {"b", "value", "is_optimum"}, rows);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// value-surface: rows (b, K, v_b(x0)) plus the optimal-barrier ridge.

int run_value_surface(CommonOpts& o) {
    resolve_preset(o);
    const dcl::ModelParams m{o.mu, o.sigma};
    dcl::require_model(m);
    if (!(o.q > 0.0)) throw dcl::ConfigError("value-surface: require q > 0");

    const std::vector<double> k_grid =
        make_grid(o.gk_min, o.gk_max, o.gk_count, o.gk_log, "K grid");
    const double gb_max = o.o_gb_max->count()
                              ? o.gb_max
                              : dcl::classical_barrier(m, dcl::ControlParams{o.q, 1.0});
    const std::vector<double> b_grid = make_grid(o.gb_min, gb_max, o.gb_count, false, "b grid");

    std::vector<std::vector<std::string>> rows;
    for (double k : k_grid) {
        const dcl::ControlParams c{o.q, k};
        dcl::require_control(c);
        for (double b : b_grid) {
            const double v = dcl::value(o.x0, dcl::make_value_function(b, m, c));
            rows.push_back({"surface", fmt12(b), fmt12(k), fmt12(v)});
        }
    }
    for (double k : k_grid) {
        const dcl::ControlParams c{o.q, k};
        const dcl::RegimeDecision dec = dcl::solve_b_star(m, c);
        const double v = dcl::value(o.x0, dcl::make_value_function(dec.b_star, m, c));
        rows.push_back({"ridge", fmt12(dec.b_star), fmt12(k), fmt12(v)});
    }

    ConfigEcho echo = model_echo(o);
    echo.emplace_back("x0", fmt12(o.x0));
    echo.emplace_back("grid_b",
                      fmt12(o.gb_min) + ":" + fmt12(gb_max) + ":" + std::to_string(o.gb_count));
    echo.emplace_back("grid_k", fmt12(o.gk_min) + ":" + fmt12(o.gk_max) + ":" +
                                    std::to_string(o.gk_count) +
                                    (o.gk_log ? ":log" : ":linear"));
    emit_table(o, "value-surface", echo, {"kind", "b", "k", "value"}, rows);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// barrier-curve: rows (K, b*(K)) with the classical level c* alongside.

int run_barrier_curve(CommonOpts& o) {
    resolve_preset(o);
    const dcl::ModelParams m{o.mu, o.sigma};
    dcl::require_model(m);
    if (!(o.q > 0.0)) throw dcl::ConfigError("barrier-curve: require q > 0");

    const std::vector<double> k_grid =
        make_grid(o.gk_min, o.gk_max, o.gk_count, o.gk_log, "K grid");
    const double c_star = dcl::classical_barrier(m, dcl::ControlParams{o.q, 1.0});

    std::vector<std::vector<std::string>> rows;
    for (double k : k_grid) {
        const dcl::RegimeDecision dec = dcl::solve_b_star(m, dcl::ControlParams{o.q, k});
        rows.push_back({fmt12(k), fmt12(dec.b_star), fmt12(c_star)});
    }

    ConfigEcho echo = model_echo(o);
    echo.emplace_back("grid_k", fmt12(o.gk_min) + ":" + fmt12(o.gk_max) + ":" +
                                    std::to_string(o.gk_count) +
                                    (o.gk_log ? ":log" : ":linear"));
    echo.emplace_back("c_star", fmt12(c_star));
    emit_table(o, "barrier-curve", echo, {"k", "b_star", "c_star"}, rows);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// verify: machine-readable report of the analytic checks plus a Monte Carlo
// cross-validation table. Exit status is nonzero iff any check fails.

ordered_json mc_row(const std::string& name, const dcl::McEstimate& est, double target,
                    double z_max) {
    ordered_json row;
    row["name"] = name;
    row["mean"] = est.mean;
    row["std_error"] = est.std_error;
    row["target"] = target;
    const double z = (est.mean - target) / est.std_error;
    row["z"] = z;
    row["pass"] = std::isfinite(z) && std::abs(z) <= z_max;
    return row;
}

int run_verify(CommonOpts& o) {
    resolve_preset(o);
    const dcl::ModelParams m{o.mu, o.sigma};
    const dcl::ControlParams c{o.q, o.k};
    dcl::require_model(m);
    dcl::require_control(c);  // rejects K = 0 up front
    if (!(o.x0 > 0.0)) throw dcl::ConfigError("verify: require x0 > 0");

    const dcl::RegimeDecision dec = dcl::solve_b_star(m, c);
    const double b_used = o.o_b->count() ? o.b : dec.b_star;
    if (!(b_used >= 0.0)) throw dcl::ConfigError("verify: require b >= 0");
    const dcl::ValueFunctionRep rep = dcl::make_value_function(b_used, m, c);
    const double f = c.k / (c.q + c.k);

    ordered_json checks = ordered_json::array();
    auto add_check = [&checks](ordered_json j) { checks.push_back(std::move(j)); };

    // ODE residuals of the scale functions from their returned triples.
    const double grid_hi = std::max(2.0 * dec.c_star, b_used + 5.0 * m.sigma);
    const int n_grid = (o.gx_count > 1) ? o.gx_count : 1000;
    double w_res = 0.0, h_res = 0.0;
    for (int i = 1; i <= n_grid; ++i) {
        const double x = grid_hi * i / n_grid;
        const dcl::ScaleEval w = dcl::w_scale(x, m, c);
        const dcl::ScaleEval h = dcl::h_func(x, m, c);
        const double rw = 0.5 * m.sigma * m.sigma * w.d2 + m.mu * w.d1 - c.q * w.value;
        const double rh =
            0.5 * m.sigma * m.sigma * h.d2 + (m.mu - c.k * x) * h.d1 - c.q * h.value;
        w_res = std::max(w_res, std::abs(rw) / (1.0 + std::abs(c.q * w.value)));
        h_res = std::max(h_res, std::abs(rh) / (1.0 + std::abs(c.q * h.value)));
    }
    add_check({{"name", "ode_residual_w"},
               {"pass", w_res <= 1e-8},
               {"max_scaled_residual", w_res},
               {"tolerance", 1e-8}});
    add_check({{"name", "ode_residual_h"},
               {"pass", h_res <= 1e-8},
               {"max_scaled_residual", h_res},
               {"tolerance", 1e-8}});

    // Pasting diagnostics at the barrier in use.
    if (b_used > 0.0) {
        const dcl::ScaleEval wb = dcl::w_scale(b_used, m, c);
        const dcl::ScaleEval hb = dcl::h_func(b_used, m, c);
        const double vl = f * rep.c_b * wb.value;
        const double vr = f * (b_used + m.mu / c.q + rep.d_b * hb.value);
        const double c0_gap = std::abs(vl - vr);
        const double c0_tol = 1e-9 * (1.0 + std::abs(vl));
        add_check({{"name", "pasting_c0"},
                   {"pass", c0_gap <= c0_tol},
                   {"gap", c0_gap},
                   {"tolerance", c0_tol}});
        const double d1l = dcl::value_d1_left(b_used, rep);
        const double d1r = dcl::value_d1_right(b_used, rep);
        const double c1_gap = std::abs(d1l - d1r);
        const double c1_tol = 1e-9 * (1.0 + std::abs(d1l));
        add_check({{"name", "pasting_c1"},
                   {"pass", c1_gap <= c1_tol},
                   {"gap", c1_gap},
                   {"tolerance", c1_tol}});
        const double d2l = dcl::value_d2_left(b_used, rep);
        const double d2r = dcl::value_d2_right(b_used, rep);
        const double c2_gap = std::abs(d2l - d2r);
        const double c2_tol = 1e-7 * (1.0 + std::abs(d2l));
        add_check({{"name", "pasting_c2"},
                   {"pass", c2_gap <= c2_tol},
                   {"gap", c2_gap},
                   {"tolerance", c2_tol}});
    } else {
        // b = 0: only the boundary limit v(0+) -> 0 is meaningful.
        const double v0 = f * (m.mu / c.q + rep.d_b * dcl::h_func(0.0, m, c).value);
        add_check({{"name", "pasting_c0"},
                   {"pass", std::abs(v0) <= 1e-9},
                   {"gap", std::abs(v0)},
                   {"tolerance", 1e-9}});
    }

    // HJB conditions on a positive grid nudged off the barrier point.
    std::vector<double> grid;
    grid.reserve(n_grid);
    for (int i = 1; i <= n_grid; ++i) {
        double x = grid_hi * i / n_grid;
        if (std::abs(x - b_used) < 1e-12) x += 2e-12;
        grid.push_back(x);
    }
    const dcl::HjbReport hjb = dcl::hjb_check(rep, grid);
    int violations = 0;
    for (bool g : hjb.gradient_ok) violations += !g;
    add_check({{"name", "hjb_gradient"}, {"pass", violations == 0}, {"violations", violations}});
    add_check({{"name", "hjb_residual"},
               {"pass", hjb.max_abs_residual <= 1e-7},
               {"max_scaled_residual", hjb.max_abs_residual},
               {"tolerance", 1e-7}});

    // Ratio inequality q H/H' < K (mu/K - b) over a broad barrier grid.
    {
        const double hi = 2.0 * std::max(dec.c_star, m.mu / c.k);
        double min_gap = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 200; ++i) {
            const double b = hi * i / 200.0;
            const dcl::ScaleEval h = dcl::h_func(b, m, c);
            min_gap = std::min(min_gap, c.k * (m.mu / c.k - b) - c.q * h.value / h.d1);
        }
        add_check(
            {{"name", "h_ratio_inequality"}, {"pass", min_gap > 0.0}, {"min_gap", min_gap}});
    }

    // Monte Carlo cross-validation of the closed forms (smoke scale; the
    // levels derive from x0 so every preset verifies out of the box).
    {
        const double z_max = 4.0;
        const double exit_level = 2.0 * o.x0;
        const double passage_level = 0.5 * o.x0;

        dcl::SimConfig cfg;
        cfg.step = o.step;
        cfg.paths = o.paths;
        cfg.seed = o.seed;
        cfg.scheme = parse_scheme(o.scheme);

        double target = dcl::w_scale(o.x0, m, c).value / dcl::w_scale(exit_level, m, c).value;
        cfg.horizon = auto_horizon(c.q, 1.0, target, cfg.paths, cfg.step);
        add_check(mc_row("mc_two_sided_exit",
                         dcl::estimate(m, c, {dcl::FunctionalKind::TwoSidedExit, o.x0, exit_level},
                                       b_used, cfg),
                         target, z_max));

        cfg.seed = o.seed + 1;
        target = dcl::h_func(o.x0, m, c).value / dcl::h_func(passage_level, m, c).value;
        cfg.horizon = auto_horizon(c.q, 1.0, target, cfg.paths, cfg.step);
        add_check(mc_row(
            "mc_first_passage",
            dcl::estimate(m, c, {dcl::FunctionalKind::FirstPassageLaplace, o.x0, passage_level},
                          b_used, cfg),
            target, z_max));

        cfg.seed = o.seed + 2;
        target = (o.x0 + m.mu / c.q) / (c.q + c.k);
        cfg.horizon = auto_horizon(c.q, target, target, cfg.paths, cfg.step);
        add_check(mc_row("mc_discounted_linear_ou",
                         dcl::estimate(m, c, {dcl::FunctionalKind::DiscountedLinearOU, o.x0},
                                       b_used, cfg),
                         target, z_max));

        cfg.seed = o.seed + 3;
        target = dcl::value(o.x0, rep);
        cfg.horizon = auto_horizon(c.q, (o.x0 + m.mu / c.q) / (c.q + c.k), target, cfg.paths,
                                   cfg.step);
        add_check(mc_row("mc_dividends",
                         dcl::estimate(m, c, {dcl::FunctionalKind::DiscountedDividends, o.x0},
                                       b_used, cfg),
                         target, z_max));
    }

    bool all_pass = true;
    for (const auto& chk : checks) all_pass = all_pass && chk.at("pass").get<bool>();

    ordered_json out;
    out["command"] = "verify";
    ordered_json cfg_echo;
    for (const auto& [kk, vv] : model_echo(o)) cfg_echo[kk] = vv;
    cfg_echo["x0"] = fmt12(o.x0);
    cfg_echo["paths"] = std::to_string(o.paths);
    cfg_echo["step"] = fmt12(o.step);
    cfg_echo["seed"] = std::to_string(o.seed);
    cfg_echo["scheme"] = o.scheme;
    out["config"] = cfg_echo;
    out["regime"] =
        dec.regime == dcl::Regime::LinearAtZero ? "linear-at-zero" : "delayed-at-b-star";
    out["b_star"] = dec.b_star;
    out["b_used"] = b_used;
    out["delta"] = dec.delta;
    out["threshold"] = dec.threshold;
    out["c_star"] = dec.c_star;
    out["checks"] = checks;
    out["pass"] = all_pass;

    write_stream(o.out_path, out.dump(2) + "\n");
    if (!all_pass) throw CheckFailure("verify: one or more checks failed");
    return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate: one Monte Carlo estimate against its closed-form target.

int run_simulate(CommonOpts& o, const std::string& functional) {
    resolve_preset(o);
    const dcl::ModelParams m{o.mu, o.sigma};
    const dcl::ControlParams c{o.q, o.k};
    dcl::require_model(m);
    dcl::require_control(c);

    // The barrier only matters for the dividend functional; solve for b*
    // lazily so OU/BM targets work for any drift sign.
    double b_used = o.o_b->count() ? o.b : 0.0;
    if (functional == "dividends" && !o.o_b->count())
        b_used = dcl::solve_b_star(m, c).b_star;
    if (!(b_used >= 0.0)) throw dcl::ConfigError("simulate: require b >= 0");

    dcl::SimConfig cfg;
    cfg.step = o.step;
    cfg.paths = o.paths;
    cfg.seed = o.seed;
    cfg.scheme = parse_scheme(o.scheme);

    dcl::PathFunctionalSpec spec;
    spec.x0 = o.x0;
    double target;
    if (functional == "dividends") {
        spec.kind = dcl::FunctionalKind::DiscountedDividends;
        target = dcl::value(o.x0, dcl::make_value_function(b_used, m, c));
        cfg.horizon = o.o_horizon->count()
                          ? o.horizon
                          : auto_horizon(c.q, (o.x0 + m.mu / c.q) / (c.q + c.k), target,
                                         cfg.paths, cfg.step);
    } else if (functional == "two-sided-exit") {
        spec.kind = dcl::FunctionalKind::TwoSidedExit;
        spec.level = o.o_level->count() ? o.level : 2.0 * o.x0;
        target = dcl::w_scale(o.x0, m, c).value / dcl::w_scale(spec.level, m, c).value;
        cfg.horizon = o.o_horizon->count()
                          ? o.horizon
                          : auto_horizon(c.q, 1.0, target, cfg.paths, cfg.step);
    } else if (functional == "first-passage") {
        spec.kind = dcl::FunctionalKind::FirstPassageLaplace;
        spec.level = o.o_level->count() ? o.level : 0.5 * o.x0;
        target = dcl::h_func(o.x0, m, c).value / dcl::h_func(spec.level, m, c).value;
        cfg.horizon = o.o_horizon->count()
                          ? o.horizon
                          : auto_horizon(c.q, 1.0, target, cfg.paths, cfg.step);
    } else if (functional == "linear-ou") {
        spec.kind = dcl::FunctionalKind::DiscountedLinearOU;
        target = (o.x0 + m.mu / c.q) / (c.q + c.k);
        cfg.horizon = o.o_horizon->count()
                          ? o.horizon
                          : auto_horizon(c.q, target, target, cfg.paths, cfg.step);
    } else {
        throw dcl::ConfigError("unknown functional: " + functional);
    }

    const dcl::McEstimate est = dcl::estimate(m, c, spec, b_used, cfg);
    if (dcl::high_variance(est))
        std::cerr << "warning: std_error exceeds 5% of |mean|; increase --paths\n";

    ordered_json out;
    out["command"] = "simulate";
    ordered_json cfg_echo;
    for (const auto& [kk, vv] : model_echo(o)) cfg_echo[kk] = vv;
    cfg_echo["x0"] = fmt12(o.x0);
    cfg_echo["b"] = fmt12(b_used);
    cfg_echo["functional"] = functional;
    if (std::isfinite(spec.level)) cfg_echo["level"] = fmt12(spec.level);
    cfg_echo["paths"] = std::to_string(cfg.paths);
    cfg_echo["step"] = fmt12(cfg.step);
    cfg_echo["horizon"] = fmt12(cfg.horizon);
    cfg_echo["seed"] = std::to_string(cfg.seed);
    cfg_echo["scheme"] = o.scheme;
    out["config"] = cfg_echo;

    ordered_json je;
    je["mean"] = est.mean;
    if (std::isfinite(est.std_error))
        je["std_error"] = est.std_error;
    else
        je["std_error"] = nullptr;
    je["n"] = est.n;
    je["scheme"] = o.scheme;
    je["step"] = est.step;
    out["estimate"] = je;
    out["target"] = target;
    if (est.n > 1 && std::isfinite(est.std_error) && est.std_error > 0.0)
        out["z"] = (est.mean - target) / est.std_error;
    else
        out["z"] = nullptr;
    out["se_warning"] = dcl::high_variance(est);

    write_stream(o.out_path, out.dump(2) + "\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Delayed linear payout strategies for a Brownian surplus model"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI configuration file, one section per subcommand");

    CommonOpts vc, vs, bc, vf, sm;
    std::string functional = "dividends";

    CLI::App* c_vc = app.add_subcommand("value-curve", "Value of pi_b as a function of b");
    add_model_flags(c_vc, vc, "fig1-top");
    c_vc->add_option("--grid-b-min", vc.gb_min)->capture_default_str();
    vc.o_gb_max = c_vc->add_option("--grid-b-max", vc.gb_max, "default: c*");
    vc.gb_count = 401;
    c_vc->add_option("--grid-b-count", vc.gb_count)->capture_default_str();
    c_vc->add_option("--format", vc.format, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}))
        ->default_val("csv");

    CLI::App* c_vs = app.add_subcommand("value-surface", "Value of pi_b over (b, K)");
    add_model_flags(c_vs, vs, "fig2");
    c_vs->add_option("--grid-b-min", vs.gb_min)->capture_default_str();
    vs.o_gb_max = c_vs->add_option("--grid-b-max", vs.gb_max, "default: c*");
    vs.gb_count = 81;
    c_vs->add_option("--grid-b-count", vs.gb_count)->capture_default_str();
    vs.gk_min = 0.02;
    vs.gk_max = 0.5;
    vs.gk_count = 40;
    c_vs->add_option("--grid-k-min", vs.gk_min)->capture_default_str();
    c_vs->add_option("--grid-k-max", vs.gk_max)->capture_default_str();
    c_vs->add_option("--grid-k-count", vs.gk_count)->capture_default_str();
    c_vs->add_flag("--grid-k-log", vs.gk_log, "log-spaced K grid");
    c_vs->add_option("--format", vs.format, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}))
        ->default_val("csv");

    CLI::App* c_bc = app.add_subcommand("barrier-curve", "Optimal barrier b* as a function of K");
    add_model_flags(c_bc, bc, "fig3");
    bc.gk_min = 0.01;
    bc.gk_max = 1000.0;
    bc.gk_count = 40;
    bc.gk_log = true;
    c_bc->add_option("--grid-k-min", bc.gk_min)->capture_default_str();
    c_bc->add_option("--grid-k-max", bc.gk_max)->capture_default_str();
    c_bc->add_option("--grid-k-count", bc.gk_count)->capture_default_str();
    c_bc->add_flag("--grid-k-log,!--grid-k-linear", bc.gk_log, "K grid spacing");
    c_bc->add_option("--format", bc.format, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}))
        ->default_val("csv");

    CLI::App* c_vf = app.add_subcommand("verify", "Analytic + Monte Carlo verification report");
    add_model_flags(c_vf, vf, "fig1-top");
    vf.o_b = c_vf->add_option("--b", vf.b, "Barrier to verify (default: solved b*)");
    vf.paths = 4000;
    c_vf->add_option("--paths", vf.paths)->capture_default_str();
    vf.step = 5e-3;
    c_vf->add_option("--step", vf.step)->capture_default_str();
    c_vf->add_option("--seed", vf.seed)->capture_default_str();
    c_vf->add_option("--scheme", vf.scheme, "euler|piecewise")
        ->check(CLI::IsMember({"euler", "piecewise"}))
        ->capture_default_str();
    c_vf->add_option("--grid-x-count", vf.gx_count, "HJB/ODE grid size")->default_val(1000);
    c_vf->add_option("--format", vf.format)->check(CLI::IsMember({"json"}))->default_val("json");

    CLI::App* c_sm = app.add_subcommand("simulate", "Monte Carlo estimate vs closed form");
    add_model_flags(c_sm, sm, "fig1-top");
    sm.o_b = c_sm->add_option("--b", sm.b, "Barrier (default: solved b*)");
    c_sm->add_option("--functional", functional,
                     "dividends|two-sided-exit|first-passage|linear-ou")
        ->check(CLI::IsMember({"dividends", "two-sided-exit", "first-passage", "linear-ou"}))
        ->capture_default_str();
    sm.o_level = c_sm->add_option("--level", sm.level, "Passage/exit level");
    sm.paths = 200000;
    c_sm->add_option("--paths", sm.paths)->capture_default_str();
    sm.step = 1e-3;
    c_sm->add_option("--step", sm.step)->capture_default_str();
    sm.o_horizon = c_sm->add_option("--horizon", sm.horizon, "default: discount-bias rule");
    c_sm->add_option("--seed", sm.seed)->capture_default_str();
    c_sm->add_option("--scheme", sm.scheme, "euler|piecewise")
        ->check(CLI::IsMember({"euler", "piecewise"}))
        ->capture_default_str();
    c_sm->add_option("--format", sm.format)->check(CLI::IsMember({"json"}))->default_val("json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (c_vc->parsed()) return run_value_curve(vc);
        if (c_vs->parsed()) return run_value_surface(vs);
        if (c_bc->parsed()) return run_barrier_curve(bc);
        if (c_vf->parsed()) return run_verify(vf);
        if (c_sm->parsed()) return run_simulate(sm, functional);
        std::cerr << "no subcommand\n";
        return kExitValidation;
    } catch (const CheckFailure& e) {
        std::cerr << e.what() << "\n";
        return kExitNumerical;
    } catch (const dcl::AccuracyError& e) {
        std::cerr << "accuracy error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const dcl::BracketError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const dcl::DegenerateError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::domain_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
}
