#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dnle/asymptotics.hpp"
#include "dnle/errors.hpp"
#include "dnle/evolution.hpp"
#include "dnle/grid.hpp"
#include "dnle/io.hpp"
#include "dnle/selfsimilar.hpp"
#include "dnle/stationary.hpp"

namespace dnle::cli {

using json = nlohmann::json;

inline const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> kinds{"simulate", "profile", "eigen",   "selfsim",
                                                "rate",     "quasilinear", "positivity"};
    return kinds;
}

inline bool is_kind(const std::string& k) {
    const auto& ks = experiment_kinds();
    return std::find(ks.begin(), ks.end(), k) != ks.end();
}

/// Everything a run produces; written to disk by `write_outputs`.
struct RunResult {
    std::string kind;
    json report;
    std::vector<std::pair<std::string, io::Table>> tables;
    std::vector<std::string> failed_checks;

    bool checks_passed() const { return failed_checks.empty(); }
};

namespace detail {

inline std::optional<double> try_number(const io::Config& cfg, const std::string& key,
                                        std::vector<std::string>& out) {
    if (!cfg.has(key)) return std::nullopt;
    try {
        return cfg.number(key);
    } catch (const ConfigError&) {
        out.push_back(key + ": must be a number");
        return std::nullopt;
    }
}

inline void require_key(const io::Config& cfg, const std::string& key, std::vector<std::string>& out) {
    if (!cfg.has(key)) out.push_back(key + ": missing required key");
}

inline void positive(const io::Config& cfg, const std::string& key, std::vector<std::string>& out) {
    if (auto x = try_number(cfg, key, out); x && !(*x > 0.0)) out.push_back(key + ": must be positive");
}

}  // namespace detail

/// Violations of the config as "key: rule" strings; empty iff the config is runnable.
inline std::vector<std::string> validate(const io::Config& cfg) {
    std::vector<std::string> out;
    detail::require_key(cfg, "experiment", out);
    const std::string kind = cfg.get("experiment", "");
    if (cfg.has("experiment") && !is_kind(kind)) out.push_back("experiment: unknown kind '" + kind + "'");

    if (kind != "eigen") detail::require_key(cfg, "params.m", out);
    detail::require_key(cfg, "params.p", out);
    detail::require_key(cfg, "domain.geometry", out);
    detail::require_key(cfg, "domain.nodes", out);

    const auto m = detail::try_number(cfg, "params.m", out);
    const auto p = detail::try_number(cfg, "params.p", out);
    const auto N = detail::try_number(cfg, "params.N", out);
    if (m && !(*m > 0.0)) out.push_back("params.m: must be positive");
    if (p && !(*p > 1.0)) out.push_back("params.p: must exceed 1");
    if (N && (!(*N >= 1.0) || *N != std::floor(*N))) out.push_back("params.N: must be a positive integer");

    const std::string geometry = cfg.get("domain.geometry", "");
    if (cfg.has("domain.geometry") && geometry != "interval" && geometry != "ball")
        out.push_back("domain.geometry: must be 'interval' or 'ball'");
    if (geometry == "interval" && N && *N != 1.0) out.push_back("params.N: interval geometry requires N = 1");
    if (auto n = detail::try_number(cfg, "domain.nodes", out); n && *n < double(kMinNodes))
        out.push_back("domain.nodes: resolution below minimum (" + std::to_string(kMinNodes) + ")");
    detail::positive(cfg, "domain.size", out);

    for (const char* key : {"solver.dt", "solver.dt_max", "solver.tolerance", "time.end", "time.start",
                            "time.samples", "positivity.delta", "quasilinear.gap_threshold", "barrier.eps",
                            "selfsim.M", "selfsim.r_max", "profile.tolerance", "eigen.tolerance"})
        detail::positive(cfg, key, out);
    if (auto g = detail::try_number(cfg, "solver.dt_growth", out); g && *g < 1.0)
        out.push_back("solver.dt_growth: must be >= 1");

    const std::string shape = cfg.get("data.shape", "bump");
    if (shape != "bump" && shape != "indicator" && shape != "eigenmode" && shape != "separate_variables" &&
        shape != "csv")
        out.push_back("data.shape: unknown shape '" + shape + "'");
    if (shape == "csv") detail::require_key(cfg, "data.path", out);
    const std::string spacing = cfg.get("time.spacing", "linear");
    if (spacing != "linear" && spacing != "geometric") out.push_back("time.spacing: must be linear or geometric");
    const std::string method = cfg.get("profile.method", "minimize_J");
    if (method != "minimize_J" && method != "long_time_limit")
        out.push_back("profile.method: must be minimize_J or long_time_limit");

    if (m && p && *m > 0.0 && *p > 1.0) {
        const Regime r = classify_regime(*m, *p);
        const bool degenerate = r == Regime::Degenerate;
        if ((kind == "rate" || kind == "profile" || kind == "positivity" || kind == "selfsim") && !degenerate)
            out.push_back(kind + " requires degenerate regime");
        if (kind == "quasilinear" && r != Regime::Quasilinear) out.push_back("quasilinear requires m(p-1) = 1");
        if (kind == "simulate" && r == Regime::Fast) out.push_back("simulate does not support the fast regime");
        if (shape == "separate_variables" && !degenerate && kind != "eigen")
            out.push_back("data.shape: separate_variables requires degenerate regime");
    }
    if (kind == "positivity" && shape != "bump" && shape != "indicator")
        out.push_back("data.shape: positivity requires compactly supported bump or indicator data");
    return out;
}

inline Parameters parameters_from(const io::Config& cfg) {
    return Parameters::make(cfg.number("params.m", 1.0 / (cfg.number("params.p") - 1.0)), cfg.number("params.p"),
                            int(cfg.integer("params.N", 1)));
}

inline Domain domain_from(const io::Config& cfg, const Parameters& prm) {
    const double L = cfg.number("domain.size", 1.0);
    const auto n = std::size_t(cfg.integer("domain.nodes"));
    if (cfg.get("domain.geometry") == "ball") return Domain::ball(L, prm.N, n);
    return Domain::interval(L, n);
}

inline SolverControls controls_from(const io::Config& cfg, double p, double dt_default) {
    auto c = SolverControls::defaults_for(p);
    c.dt = cfg.number("solver.dt", dt_default);
    c.dt_growth = cfg.number("solver.dt_growth", 1.0);
    c.dt_max = cfg.number("solver.dt_max", c.dt_growth > 1.0 ? std::numeric_limits<double>::infinity() : c.dt);
    c.tolerance = cfg.number("solver.tolerance", c.tolerance);
    c.max_iterations = int(cfg.integer("solver.max_iterations", c.max_iterations));
    return c;
}

inline std::vector<double> output_times(const io::Config& cfg, double start, double end, std::size_t samples,
                                        const std::string& spacing) {
    const double t0 = cfg.number("time.start", start);
    const double t1 = cfg.number("time.end", end);
    const auto n = std::size_t(cfg.integer("time.samples", long(samples)));
    if (!(t1 > t0)) throw ConfigError("time.end: must exceed time.start");
    if (n < 2) throw ConfigError("time.samples: need at least 2");
    return cfg.get("time.spacing", spacing) == "geometric" ? geometric_times(t0, t1, n) : linear_times(t0, t1, n);
}

/// Initial datum described by the `data.*` keys.
inline Field initial_data(const io::Config& cfg, const Parameters& prm, const Domain& domain) {
    const std::string shape = cfg.get("data.shape", "bump");
    const double L = domain.size();
    const double centre = cfg.number("data.center", domain.geometry() == Geometry::Ball ? 0.0 : 0.5 * L);
    const double width = cfg.number("data.width", 0.2 * L);
    const double height = cfg.number("data.height", 1.0);
    Field u;
    if (shape == "bump") {
        u = domain.sample([&](double x) { return height * std::max(0.0, 1.0 - std::pow((x - centre) / width, 2)); });
    } else if (shape == "indicator") {
        u = domain.sample([&](double x) { return std::abs(x - centre) < width ? height : 0.0; });
    } else if (shape == "eigenmode") {
        const double k = cfg.number("data.mode", 1.0);
        u = domain.sample([&](double x) {
            return domain.geometry() == Geometry::Ball ? height * std::cos(0.5 * std::numbers::pi * x / L)
                                                       : height * std::sin(k * std::numbers::pi * x / L);
        });
    } else if (shape == "separate_variables") {
        const double s = cfg.number("data.s", 1.0);
        u = compute_profile_f(prm, domain, ProfileMethod::MinimizeJ).f;
        for (double& x : u) x *= std::pow(s, -prm.mu);
    } else {
        const auto t = io::read_csv(cfg.get("data.path"));
        u = t.column(cfg.get("data.column", "u"));
        if (u.size() != domain.size_nodes())
            throw ConfigError("data.path: expected " + std::to_string(domain.size_nodes()) + " values");
    }
    if (const double a = cfg.number("data.perturbation", 0.0); a != 0.0) {
        const Field extra =
            domain.sample([&](double x) { return a * std::max(0.0, std::sin(3.0 * std::numbers::pi * x / L)); });
        for (std::size_t i = 0; i < u.size(); ++i) u[i] += extra[i];
    }
    return domain.zero_boundary(std::move(u));
}

/// One row per state: t followed by the nodal values; node positions form the header.
inline io::Table trajectory_table(const Trajectory& traj, const Domain& domain) {
    io::Table t;
    std::vector<double> times;
    for (const auto& s : traj.states) times.push_back(s.t);
    t.add("t", times);
    for (std::size_t i = 0; i < domain.size_nodes(); ++i) {
        std::vector<double> col;
        for (const auto& s : traj.states) col.push_back(s.u[i]);
        t.add(io::format_double(domain.node(i)), std::move(col));
    }
    return t;
}

inline io::Table diagnostics_table(const Trajectory& traj) {
    io::Table t;
    std::vector<double> times, mass, sup, ent;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        times.push_back(traj.states[k].t);
        mass.push_back(traj.diagnostics[k].mass);
        sup.push_back(traj.diagnostics[k].supnorm);
        ent.push_back(traj.diagnostics[k].entropy);
    }
    t.add("t", times);
    t.add("mass", mass);
    t.add("supnorm", sup);
    t.add("entropy", ent);
    return t;
}

namespace detail {

inline json parameters_json(const Parameters& prm) {
    json j{{"m", prm.m}, {"p", prm.p}, {"N", prm.N}, {"kappa", prm.kappa}, {"regime", to_string(prm.regime)}};
    if (prm.regime == Regime::Degenerate) j["mu"] = prm.mu;
    return j;
}

inline json optional_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

inline void check(RunResult& r, bool ok, const std::string& what) {
    if (!ok) r.failed_checks.push_back(what);
}

inline io::Table field_table(const Domain& domain, std::initializer_list<std::pair<std::string, const Field*>> cols) {
    io::Table t;
    t.add("x", std::vector<double>(domain.nodes().begin(), domain.nodes().end()));
    for (const auto& [name, f] : cols) t.add(name, *f);
    return t;
}

inline RunResult run_simulate(const io::Config& cfg, const Parameters& prm, const Domain& domain) {
    RunResult r;
    const Field u0 = initial_data(cfg, prm, domain);
    const auto times = output_times(cfg, 0.1, 1.0, 20, "linear");
    const auto traj = solve(u0, times.back(), prm, domain, controls_from(cfg, prm.p, 1e-3), times);
    r.tables.emplace_back("trajectory.csv", trajectory_table(traj, domain));
    r.tables.emplace_back("diagnostics.csv", diagnostics_table(traj));
    const auto& last = traj.diagnostics.back();
    r.report = {{"final_time", traj.states.back().t}, {"final_mass", last.mass}, {"final_supnorm", last.supnorm},
                {"states", traj.size()}};
    bool finite = true;
    for (const auto& s : traj.states) finite = finite && all_finite(s.u);
    check(r, finite, "solution stays finite");
    return r;
}

inline RunResult run_profile(const io::Config& cfg, const Parameters& prm, const Domain& domain) {
    RunResult r;
    const auto method =
        cfg.get("profile.method", "minimize_J") == "minimize_J" ? ProfileMethod::MinimizeJ : ProfileMethod::LongTimeLimit;
    const double tol = cfg.number("profile.tolerance", 1e-8);
    const auto prof = compute_profile_f(prm, domain, method, tol);
    r.tables.emplace_back("profile.csv", field_table(domain, {{"f", &prof.f}, {"w", &prof.w}}));
    r.report = {{"method", to_string(method)}, {"residual", prof.residual_norm}, {"C1", prof.C1}, {"C2", prof.C2},
                {"iterations", prof.iterations}, {"max_f", sup_norm(prof.f)}};
    check(r, prof.residual_norm <= tol, "profile residual within tolerance");
    return r;
}

inline RunResult run_eigen(const io::Config& cfg, const Parameters& prm, const Domain& domain) {
    RunResult r;
    const double tol = cfg.number("eigen.tolerance", 1e-8);
    const auto eig = compute_first_eigenpair(prm.p, domain, tol);
    r.tables.emplace_back("eigen.csv", field_table(domain, {{"V", &eig.V}}));
    r.report = {{"lambda1", eig.lambda1}, {"residual", eig.residual_norm}, {"iterations", eig.iterations}};
    check(r, eig.residual_norm <= tol, "eigen residual within tolerance");
    if (cfg.has("assert.lambda1")) {
        const double want = cfg.number("assert.lambda1");
        const double rtol = cfg.number("assert.rtol", 0.01);
        check(r, std::abs(eig.lambda1 - want) <= rtol * std::abs(want), "lambda1 matches expected value");
    }
    return r;
}

inline RunResult run_selfsim(const io::Config& cfg, const Parameters& prm) {
    RunResult r;
    const double beta_b = 1.0 / (prm.p + prm.N * (prm.kappa - 1.0));
    const double beta = cfg.number("selfsim.beta", beta_b);
    const double M = cfg.number("selfsim.M", 1.0);
    const auto spec = SelfSimilarSpec::from_beta(beta, prm, M);
    const auto kind = spec.classify(prm);
    const double r_max = cfg.number("selfsim.r_max", 2.0 * support_radius_bound(M, prm, std::max(beta, 1e-12)));
    ProfileControls ctl;
    const auto curve = integrate_profile(spec, prm, r_max, ctl);
    std::vector<double> h(curve.g.size());
    for (std::size_t k = 0; k < h.size(); ++k) h[k] = clamped_pow(curve.g[k], 1.0 / prm.m);
    io::Table t;
    t.add("r", curve.r);
    t.add("g", curve.g);
    t.add("h", h);
    r.tables.emplace_back("profile.csv", std::move(t));
    r.report = {{"case", to_string(kind)},
                {"alpha", spec.alpha},
                {"beta", spec.beta},
                {"M", M},
                {"support_radius", optional_json(curve.support_radius)},
                {"crossing_slope", optional_json(curve.crossing_slope)}};
    if (kind == SelfSimilarCase::Barenblatt) {
        const auto b = Barenblatt::with_height(prm, M, 1.0);
        double diff = 0.0;
        for (std::size_t k = 0; k < curve.r.size(); ++k) diff = std::max(diff, std::abs(h[k] - b.value(curve.r[k], 0.0)));
        r.report["closed_form_max_difference"] = diff;
        check(r, diff <= cfg.number("assert.closed_form_tolerance", 1e-6), "profile matches closed form");
    }
    if (kind == SelfSimilarCase::Intermediate) check(r, curve.support_radius.has_value(), "profile crosses zero");
    return r;
}

inline RunResult run_rate(const io::Config& cfg, const Parameters& prm, const Domain& domain) {
    RunResult r;
    const Field u0 = initial_data(cfg, prm, domain);
    const auto f = compute_profile_f(prm, domain, ProfileMethod::MinimizeJ).f;
    const auto times = output_times(cfg, std::exp(1.0), std::exp(6.0), 60, "geometric");
    const auto traj = solve(u0, times.back(), prm, domain, controls_from(cfg, prm.p, 1e-2), times);
    const auto rep = rate_report_degenerate(traj, f, prm, domain, times.front());
    io::Table t;
    t.add("t", rep.t);
    t.add("error", rep.error);
    t.add("weighted_error", rep.weighted_error);
    const bool separate = cfg.get("data.shape", "bump") == "separate_variables";
    double closed_form_deviation = 0.0;
    if (separate) {
        const double s = cfg.number("data.s", 1.0);
        std::vector<double> exact;
        for (std::size_t k = 0; k < rep.t.size(); ++k) {
            exact.push_back(std::abs(std::pow(rep.t[k] / (s + rep.t[k]), prm.mu) - 1.0));
            closed_form_deviation = std::max(closed_form_deviation, std::abs(rep.weighted_error[k] - exact[k]) / exact[k]);
        }
        t.add("closed_form", exact);
    }
    r.tables.emplace_back("series.csv", std::move(t));
    r.report = {{"slope", rep.fit.slope},         {"intercept", rep.fit.intercept}, {"fit_points", rep.fit.points},
                {"fit_t_min", rep.fit_t_min},      {"fit_t_max", rep.fit_t_max},     {"C_num", rep.C_num},
                {"trivial", rep.trivial}};
    check(r, !rep.trivial, "solution is nontrivial");
    if (separate) {
        // the weighted error is |(t/(s+t))^mu - 1| exactly; C_num tends to mu s
        const double s = cfg.number("data.s", 1.0);
        r.report["closed_form_relative_deviation"] = closed_form_deviation;
        check(r, closed_form_deviation <= cfg.number("assert.closed_form_rtol", 0.05), "weighted error matches closed form");
        check(r, std::abs(rep.C_num - prm.mu * s) <= 0.05 * prm.mu * s, "C_num within 5% of mu s");
    }
    if (!separate || cfg.has("assert.slope_min") || cfg.has("assert.slope_max")) {
        const double lo = cfg.number("assert.slope_min", -1.15), hi = cfg.number("assert.slope_max", -0.85);
        check(r, rep.fit.slope >= lo && rep.fit.slope <= hi, "fitted slope within bounds");
    }
    return r;
}

inline RunResult run_quasilinear(const io::Config& cfg, const Parameters& prm, const Domain& domain) {
    RunResult r;
    const Field u0 = initial_data(cfg, prm, domain);
    const auto eig = compute_first_eigenpair(prm.p, domain);
    const auto times = output_times(cfg, 0.05, 2.0, 40, "linear");
    auto controls = controls_from(cfg, prm.p, std::min(1e-2, 0.5 / eig.lambda1));
    const auto traj = solve_quasilinear_rescaled(u0, prm, domain, controls, times, eig.lambda1);
    const double threshold = cfg.number("quasilinear.gap_threshold", 0.05);
    const auto rep = quasilinear_convergence_report(traj, eig, prm, domain, threshold);
    io::Table t;
    t.add("t", rep.envelopes.t);
    t.add("c_lower", rep.envelopes.c_lower);
    t.add("c_upper", rep.envelopes.c_upper);
    t.add("gap", rep.gap);
    t.add("ref_sup", rep.ref_sup);
    r.tables.emplace_back("series.csv", std::move(t));
    r.report = {{"lambda1", eig.lambda1},
                {"c_star", rep.c_star},
                {"c_star_error", rep.c_star_error},
                {"final_gap", rep.gap.back()},
                {"final_ref_sup", rep.final_ref_sup},
                {"gap_monotone", rep.gap_monotone},
                {"envelope_monotonicity_violation", rep.envelopes.monotonicity_violation()}};
    check(r, rep.gap_monotone, "envelope gap decreases");
    check(r, rep.final_ref_sup < threshold, "relative error below threshold");
    if (cfg.has("barrier.eps")) {
        const double eps = cfg.number("barrier.eps");
        // φ at the first sample with S = c* V^{1/m}
        Field S(eig.V.size());
        for (std::size_t i = 0; i < S.size(); ++i) S[i] = rep.c_star * clamped_pow(eig.V[i], 1.0 / prm.m);
        const Field phi = relative_error_field(traj.v.front(), S, prm.m, domain);
        double phi_max = 0.0, psi_max = 0.0;
        for (std::size_t i = 0; i < phi.size(); ++i) {
            if (domain.is_dirichlet(i)) continue;
            phi_max = std::max(phi_max, phi[i]);
            psi_max = std::max(psi_max, -phi[i]);
        }
        const auto bounds = measure_barrier_bounds(eig, prm.p, domain, phi_max, psi_max);
        json barriers{{"t0", traj.time.front()}, {"phi_max", phi_max}, {"psi_max", psi_max}};
        for (const auto kind : {BarrierKind::Upper, BarrierKind::Lower}) {
            const auto spec = kind == BarrierKind::Upper ? choose_upper_barrier(eps, bounds)
                                                         : choose_lower_barrier(eps, bounds);
            const auto res = barrier_residual(spec, eig.V, eig.lambda1, prm.p, domain);
            const char* name = kind == BarrierKind::Upper ? "upper" : "lower";
            barriers[name] = {{"A", spec.A},         {"B", spec.B},
                              {"C", spec.C},         {"xi", spec.xi},
                              {"delta", spec.delta}, {"T", spec.T},
                              {"slack", spec.condition_slack()},
                              {"min_residual", res.min_residual},
                              {"points", res.points}};
            check(r, spec.condition_slack() >= 0.0, std::string(name) + " barrier condition holds");
            check(r, res.min_residual >= -1e-8, std::string(name) + " barrier residual nonnegative");
        }
        r.report["barriers"] = barriers;
    }
    return r;
}

inline RunResult run_positivity(const io::Config& cfg, const Parameters& prm, const Domain& domain) {
    RunResult r;
    const Field u0 = initial_data(cfg, prm, domain);
    const auto times = output_times(cfg, 0.01, 20.0, 2000, "linear");
    const auto traj = solve(u0, times.back(), prm, domain, controls_from(cfg, prm.p, 1e-3), times);
    const double delta = cfg.number("positivity.delta", 0.1 * domain.size());
    const auto pos = positivity_experiment(traj, domain, delta, cfg.number("positivity.threshold", 1e-10));

    // Barenblatt subsolution of height eps and radius delta_b under the data
    const double L = domain.size();
    const double centre = cfg.number("data.center", domain.geometry() == Geometry::Ball ? 0.0 : 0.5 * L);
    const double delta_b = 0.5 * cfg.number("data.width", 0.2 * L);
    double eps = std::numeric_limits<double>::infinity();
    double reach_inner = 0.0, reach_all = 0.0;
    const Field d = distance_field(domain);
    for (std::size_t i = 0; i < u0.size(); ++i) {
        const double dist = std::abs(domain.node(i) - centre);
        if (dist <= delta_b) eps = std::min(eps, u0[i]);
        if (domain.is_dirichlet(i)) continue;
        reach_all = std::max(reach_all, dist);
        if (d[i] > delta) reach_inner = std::max(reach_inner, dist);
    }
    DNLE_REQUIRE(eps > 0.0 && std::isfinite(eps), Infeasible, "data does not dominate a positive Barenblatt");
    const double bound_inner = barenblatt_positivity_bound(prm, eps, delta_b, reach_inner);
    const double bound_boundary = barenblatt_positivity_bound(prm, eps, delta_b, reach_all);

    const auto f = compute_profile_f(prm, domain, ProfileMethod::MinimizeJ).f;
    SandwichReport sw;
    if (pos.T_boundary) sw = sandwich_check(traj, f, prm, domain, *pos.T_boundary);

    io::Table t;
    std::vector<double> tt, sup, inf;
    for (const auto& s : traj.states) {
        tt.push_back(s.t);
        sup.push_back(sup_norm(s.u));
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < s.u.size(); ++i)
            if (!domain.is_dirichlet(i)) lo = std::min(lo, s.u[i]);
        inf.push_back(lo);
    }
    t.add("t", tt);
    t.add("supnorm", sup);
    t.add("interior_min", inf);
    r.tables.emplace_back("series.csv", std::move(t));
    r.report = {{"T_inner", optional_json(pos.T_inner)},
                {"T_boundary", optional_json(pos.T_boundary)},
                {"threshold", pos.threshold},
                {"delta", delta},
                {"barenblatt_bound_inner", bound_inner},
                {"barenblatt_bound_boundary", bound_boundary},
                {"sandwich", {{"ok", sw.ok}, {"s0", optional_json(std::isfinite(sw.s0) ? std::optional(sw.s0) : std::nullopt)},
                              {"s1", optional_json(std::isfinite(sw.s1) ? std::optional(sw.s1) : std::nullopt)},
                              {"T4", sw.T4}, {"reason", sw.reason}}}};
    check(r, pos.T_inner && pos.T_boundary, "positivity reached within the horizon");
    if (pos.T_inner && pos.T_boundary) {
        check(r, *pos.T_inner <= *pos.T_boundary, "T_inner <= T_boundary");
        check(r, *pos.T_inner <= bound_inner, "T_inner below Barenblatt bound");
        check(r, *pos.T_boundary <= bound_boundary, "T_boundary below Barenblatt bound");
    }
    check(r, sw.ok, "sandwich holds");
    return r;
}

inline std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace detail

/// Runs one validated experiment. Throws ConfigError listing every violation.
inline RunResult run(const io::Config& cfg) {
    if (const auto v = validate(cfg); !v.empty()) {
        std::string msg = "invalid config:";
        for (const auto& s : v) msg += "\n  " + s;
        throw ConfigError(msg);
    }
    const std::string kind = cfg.get("experiment");
    const Parameters prm = parameters_from(cfg);
    const Domain domain = domain_from(cfg, prm);
    RunResult r;
    if (kind == "simulate") r = detail::run_simulate(cfg, prm, domain);
    else if (kind == "profile") r = detail::run_profile(cfg, prm, domain);
    else if (kind == "eigen") r = detail::run_eigen(cfg, prm, domain);
    else if (kind == "selfsim") r = detail::run_selfsim(cfg, prm);
    else if (kind == "rate") r = detail::run_rate(cfg, prm, domain);
    else if (kind == "quasilinear") r = detail::run_quasilinear(cfg, prm, domain);
    else r = detail::run_positivity(cfg, prm, domain);
    r.kind = kind;
    r.report["experiment"] = kind;
    r.report["parameters"] = detail::parameters_json(prm);
    r.report["domain"] = {{"geometry", cfg.get("domain.geometry")},
                          {"size", domain.size()},
                          {"nodes", domain.size_nodes()}};
    r.report["checks_failed"] = r.failed_checks;
    return r;
}

inline std::string report_file(const std::string& kind) {
    return kind == "rate" ? "rate_report.json" : kind + ".json";
}

/// Writes the JSON report (with a `generated_at` stamp) and every table into `dir`.
inline void write_outputs(const RunResult& r, const std::string& dir) {
    std::filesystem::create_directories(dir);
    json report = r.report;
    report["generated_at"] = detail::timestamp();
    io::write_text(dir + "/" + report_file(r.kind), report.dump(2) + "\n");
    for (const auto& [name, table] : r.tables) io::write_csv(dir + "/" + name, table);
}

inline json error_json(const std::string& kind, const std::string& message) {
    return {{"error", {{"kind", kind}, {"message", message}}}};
}

enum ExitCode : int { kOk = 0, kConfigError = 2, kSolverFailure = 3, kCheckFailure = 4 };

/// Runs a config file end to end and returns the process exit code.
inline int run_file(const std::string& config_path, const std::string& kind_override, const std::string& out_dir,
                    bool assert_checks, std::string* message = nullptr) {
    auto fail = [&](int code, const std::string& kind, const std::string& what) {
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (!ec) io::write_text(out_dir + "/error.json", error_json(kind, what).dump(2) + "\n");
        if (message) *message = kind + ": " + what;
        return code;
    };
    try {
        auto cfg = io::Config::load(config_path);
        if (!kind_override.empty()) {
            if (cfg.has("experiment") && cfg.get("experiment") != kind_override)
                throw ConfigError("experiment: config declares '" + cfg.get("experiment") + "' but '" +
                                  kind_override + "' was requested");
            cfg.set("experiment", kind_override);
        }
        const auto result = run(cfg);
        write_outputs(result, out_dir);
        if (assert_checks && !result.checks_passed()) {
            std::string what;
            for (const auto& c : result.failed_checks) what += (what.empty() ? "" : "; ") + c;
            return fail(kCheckFailure, "CheckFailure", what);
        }
        return kOk;
    } catch (const ConfigError& e) {
        return fail(kConfigError, e.kind(), e.what());
    } catch (const RegimeError& e) {
        return fail(kConfigError, e.kind(), e.what());
    } catch (const Error& e) {
        return fail(kSolverFailure, e.kind(), e.what());
    } catch (const std::exception& e) {
        return fail(kSolverFailure, "InternalError", e.what());
    }
}

/// Worker count for sweeps: DNLE_THREADS when set and positive, else hardware concurrency.
inline unsigned sweep_threads(std::size_t jobs) {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("DNLE_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) n = unsigned(v);
        } catch (const std::exception&) {
        }
    }
    return unsigned(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

/// Runs independent configs on a worker pool; each writes into out_dir/<config stem>.
inline std::vector<int> run_sweep(const std::vector<std::string>& configs, const std::string& out_dir,
                                  bool assert_checks, std::vector<std::string>* messages = nullptr) {
    std::vector<int> codes(configs.size(), kOk);
    std::vector<std::string> msgs(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < configs.size(); k = next++) {
            const auto stem = std::filesystem::path(configs[k]).stem().string();
            codes[k] = run_file(configs[k], "", out_dir + "/" + stem, assert_checks, &msgs[k]);
        }
    };
    std::vector<std::thread> pool;
    const unsigned n = sweep_threads(configs.size());
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (messages) *messages = std::move(msgs);
    return codes;
}

}  // namespace dnle::cli
