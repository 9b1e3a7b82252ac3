#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dnle/errors.hpp"
#include "dnle/grid.hpp"
#include "dnle/operators.hpp"
#include "dnle/tridiagonal.hpp"

namespace dnle {

struct EvolutionState {
    double t = 0.0;
    Field u;
};

/**
 * Time-step and nonlinear-solver controls.
 *
 * With `dt_growth > 1` the step grows geometrically from `dt` up to `dt_max`; with
 * `dt_growth == 1` the step is fixed. `tolerance` bounds the max-norm residual of the
 * implicit system relative to max(‖u_old‖∞, tiny).
 */
struct SolverControls {
    double dt = 1e-3;
    double dt_growth = 1.0;
    double dt_max = std::numeric_limits<double>::infinity();
    double tolerance = 1e-10;
    int max_iterations = 50;
    int max_halvings = 20;
    FluxRegularization reg{};

    void validate(double p) const {
        DNLE_REQUIRE(dt > 0.0 && std::isfinite(dt), InvalidArgument, "dt must be positive");
        DNLE_REQUIRE(dt_growth >= 1.0, InvalidArgument, "dt growth factor must be >= 1");
        DNLE_REQUIRE(dt_max >= dt, InvalidArgument, "dt_max must be >= dt");
        DNLE_REQUIRE(tolerance > 0.0, InvalidArgument, "tolerance must be positive");
        DNLE_REQUIRE(max_iterations > 0, InvalidArgument, "max_iterations must be positive");
        reg.validate(p);
    }

    static SolverControls defaults_for(double p) {
        SolverControls c;
        c.reg = FluxRegularization::defaults_for(p);
        return c;
    }
};

struct Diagnostics {
    double mass = 0.0;
    double supnorm = 0.0;
    double entropy = std::numeric_limits<double>::quiet_NaN();
};

/// States at increasing times. The first state is the initial datum.
struct Trajectory {
    std::vector<EvolutionState> states;
    std::vector<Diagnostics> diagnostics;

    std::size_t size() const { return states.size(); }
    bool empty() const { return states.empty(); }
};

/// Rescaled orbit: `time` is τ = log t (degenerate) or t itself (quasilinear).
struct RescaledTrajectory {
    std::vector<double> time;
    std::vector<Field> v;
};

/// Entropy (1/p)∫|∇v^m|^p - (m/(m+1)) c ∫ v^{m+1}; c is μ (degenerate) or λ₁ (quasilinear).
inline double entropy(std::span<const double> v, const Parameters& prm, const Domain& domain,
                      double coefficient) {
    domain.check_field(v, "v");
    Field w(v.size()), vm1(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        w[i] = clamped_pow(v[i], prm.m);
        vm1[i] = clamped_pow(v[i], prm.m + 1.0);
    }
    auto g = domain.gradient(w);
    for (double& x : g) x = std::pow(std::abs(x), prm.p);
    return domain.integrate_faces(g) / prm.p -
           prm.m / (prm.m + 1.0) * coefficient * domain.integrate(vm1);
}

inline double entropy(std::span<const double> v, const Parameters& prm, const Domain& domain) {
    prm.require(Regime::Degenerate, "entropy with coefficient mu");
    return entropy(v, prm, domain, prm.mu);
}

/// Quadrature of the dissipation m ∫ v^{m-1} v_τ².
inline double entropy_dissipation(std::span<const double> v, std::span<const double> v_tau,
                                  const Parameters& prm, const Domain& domain) {
    Field integrand(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        integrand[i] = prm.m * clamped_pow(v[i], prm.m - 1.0) * v_tau[i] * v_tau[i];
    return domain.integrate(integrand);
}

namespace detail {

// Unknown used by Newton: u itself when m >= 1, w = u^m when m < 1. Both keep the
// nonlinearities u -> u^m and w -> w^{1/m} differentiable at zero.
struct ImplicitSystem {
    const Domain& domain;
    const Parameters& prm;
    double dt;
    double source;  // coefficient c of the linear term c u
    FluxRegularization reg;
    std::span<const double> u_old;
    double floor = 0.0;  // lower bound of du/dw when w is the unknown; keeps rows nonsingular where w = 0

    bool unknown_is_u() const { return prm.m >= 1.0; }

    double to_u(double y) const { return unknown_is_u() ? y : clamped_pow(y, 1.0 / prm.m); }
    double to_w(double y) const { return unknown_is_u() ? clamped_pow(y, prm.m) : std::max(y, 0.0); }
    double from_u(double u) const { return unknown_is_u() ? u : clamped_pow(u, prm.m); }

    Field w_of(std::span<const double> y) const {
        Field w(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) w[i] = to_w(y[i]);
        return w;
    }

    Field residual(std::span<const double> y) const {
        const auto lap = discrete_p_laplacian(domain, w_of(y), prm.p, reg);
        Field r(y.size(), 0.0);
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (domain.is_dirichlet(i)) continue;
            r[i] = (1.0 - dt * source) * to_u(y[i]) - dt * lap[i] - u_old[i];
        }
        return r;
    }

    Tridiagonal jacobian(std::span<const double> y) const {
        const auto w = w_of(y);
        Tridiagonal jac = p_laplacian_jacobian(domain, w, prm.p, reg);
        const std::size_t n = y.size();
        std::vector<double> col_scale(n, 1.0), diag_extra(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (unknown_is_u()) {
                col_scale[i] = clamped_pow_derivative(y[i], prm.m);
                diag_extra[i] = 1.0 - dt * source;
            } else {
                diag_extra[i] = (1.0 - dt * source) * std::max(clamped_pow_derivative(y[i], 1.0 / prm.m), floor);
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (domain.is_dirichlet(i)) {
                jac.set_identity_row(i);
                continue;
            }
            jac.diag[i] = -dt * jac.diag[i] * col_scale[i] + diag_extra[i];
            if (i > 0) jac.lower[i] = domain.is_dirichlet(i - 1) ? 0.0 : -dt * jac.lower[i] * col_scale[i - 1];
            if (i + 1 < n) jac.upper[i] = domain.is_dirichlet(i + 1) ? 0.0 : -dt * jac.upper[i] * col_scale[i + 1];
        }
        return jac;
    }

    // Picard linearization: diffusivities frozen at y_k.
    Tridiagonal frozen(std::span<const double> yk) const {
        const std::size_t n = yk.size();
        const auto w = w_of(yk);
        const auto g = domain.gradient(w);
        const auto area = domain.face_areas();
        const auto vol = domain.cell_volumes();
        const double h = domain.spacing();
        std::vector<double> kface(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double gi = g[i];
            const double coeff = gi != 0.0 ? p_flux(gi, prm.p, reg) / gi : p_flux_derivative(0.0, prm.p, reg);
            kface[i] = area[i] * (std::isfinite(coeff) ? coeff : 0.0) / h;
        }
        // w ≈ z ⊙ y and u ≈ zu ⊙ y with frozen z, zu
        std::vector<double> z(n), zu(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (unknown_is_u()) {
                z[i] = clamped_pow(yk[i], prm.m - 1.0);
                if (prm.m == 1.0) z[i] = 1.0;
                zu[i] = 1.0;
            } else {
                z[i] = 1.0;
                zu[i] = std::max(clamped_pow(yk[i], 1.0 / prm.m - 1.0), floor * prm.m);
            }
        }
        Tridiagonal a(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (domain.is_dirichlet(i)) {
                a.set_identity_row(i);
                continue;
            }
            const double kr = i + 1 < n ? kface[i] / vol[i] : 0.0;
            const double kl = i > 0 ? kface[i - 1] / vol[i] : 0.0;
            a.diag[i] = (1.0 - dt * source) * zu[i] + dt * (kr + kl) * z[i];
            if (i + 1 < n) a.upper[i] = domain.is_dirichlet(i + 1) ? 0.0 : -dt * kr * z[i + 1];
            if (i > 0) a.lower[i] = domain.is_dirichlet(i - 1) ? 0.0 : -dt * kl * z[i - 1];
        }
        return a;
    }
};

inline void project_nonnegative(const Domain& domain, Field& y) {
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (domain.is_dirichlet(i) || !(y[i] > 0.0)) y[i] = 0.0;
    }
}

}  // namespace detail

/**
 * One backward-Euler step of u_t = Δ_p u^m + c u (c = `source`, zero for the original
 * equation): (1 - dt c) u_new - dt Δ_p(u_new^m) = u_old.
 *
 * Damped Newton with an Armijo-type backtracking on the max-norm residual; if Newton
 * stalls, a Picard iteration with frozen diffusivities takes over. Throws NonConvergence
 * when neither reaches the tolerance within `max_iterations`.
 */
inline EvolutionState step(const EvolutionState& state, double dt, const Parameters& prm,
                           const Domain& domain, const SolverControls& controls,
                           double source = 0.0) {
    DNLE_REQUIRE(prm.regime != Regime::Fast, RegimeError,
                 "the solver does not handle the fast-diffusion regime m(p-1) < 1");
    DNLE_REQUIRE(dt > 0.0 && std::isfinite(dt), InvalidArgument, "dt must be positive");
    DNLE_REQUIRE(source * dt < 1.0, InvalidArgument, "dt * source must stay below 1");
    domain.check_field(state.u, "u");

    const double scale = std::max(sup_norm(state.u), 1e-300);
    const double tol = controls.tolerance * scale;
    if (sup_norm(state.u) == 0.0) return {state.t + dt, Field(state.u.size(), 0.0)};

    detail::ImplicitSystem sys{domain, prm, dt, source, controls.reg, state.u};
    Field y(state.u.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = sys.from_u(state.u[i]);
    detail::project_nonnegative(domain, y);
    if (!sys.unknown_is_u()) sys.floor = clamped_pow_derivative(1e-3 * sup_norm(y), 1.0 / prm.m);

    auto finish = [&](const Field& yy) {
        EvolutionState out{state.t + dt, Field(yy.size())};
        for (std::size_t i = 0; i < yy.size(); ++i) out.u[i] = domain.is_dirichlet(i) ? 0.0 : sys.to_u(yy[i]);
        return out;
    };

    Field r = sys.residual(y);
    double rnorm = sup_norm(r);
    bool stalled = false;
    for (int it = 0; it < controls.max_iterations && rnorm > tol; ++it) {
        Field delta;
        try {
            delta = solve(sys.jacobian(y), r);
        } catch (const NonConvergence&) {
            stalled = true;
            break;
        }
        double theta = 1.0;
        bool accepted = false;
        while (theta >= 1.0 / 1024.0) {
            Field trial(y.size());
            for (std::size_t i = 0; i < y.size(); ++i) trial[i] = y[i] - theta * delta[i];
            detail::project_nonnegative(domain, trial);
            Field rt = sys.residual(trial);
            const double tn = sup_norm(rt);
            if (std::isfinite(tn) && tn < (1.0 - 1e-4 * theta) * rnorm) {
                y = std::move(trial);
                r = std::move(rt);
                rnorm = tn;
                accepted = true;
                break;
            }
            theta *= 0.5;
        }
        if (!accepted) {
            stalled = true;
            break;
        }
    }
    if (rnorm <= tol) return finish(y);

    if (stalled) {
        for (int it = 0; it < controls.max_iterations; ++it) {
            Field next;
            try {
                next = solve(sys.frozen(y), state.u);
            } catch (const NonConvergence&) {
                break;
            }
            detail::project_nonnegative(domain, next);
            y = std::move(next);
            rnorm = sup_norm(sys.residual(y));
            if (rnorm <= tol) return finish(y);
        }
    }
    throw NonConvergence("implicit step did not converge (residual " + fmt(rnorm) +
                         ", tolerance " + fmt(tol) + ", dt " + fmt(dt) + ")");
}

/// Geometrically spaced times t_first, ..., t_last.
inline std::vector<double> geometric_times(double t_first, double t_last, std::size_t count) {
    DNLE_REQUIRE(t_first > 0.0 && t_last > t_first && count >= 2, InvalidArgument,
                 "geometric times need 0 < t_first < t_last and count >= 2");
    std::vector<double> t(count);
    const double ratio = std::log(t_last / t_first) / double(count - 1);
    for (std::size_t k = 0; k < count; ++k) t[k] = t_first * std::exp(ratio * double(k));
    t.back() = t_last;
    return t;
}

inline std::vector<double> linear_times(double t_first, double t_last, std::size_t count) {
    DNLE_REQUIRE(t_last > t_first && count >= 2, InvalidArgument,
                 "linear times need t_first < t_last and count >= 2");
    std::vector<double> t(count);
    for (std::size_t k = 0; k < count; ++k)
        t[k] = t_first + (t_last - t_first) * double(k) / double(count - 1);
    t.back() = t_last;
    return t;
}

inline Diagnostics diagnose(const EvolutionState& s, const Parameters& prm, const Domain& domain) {
    Diagnostics d;
    d.mass = domain.integrate(s.u);
    d.supnorm = sup_norm(s.u);
    if (prm.regime == Regime::Degenerate && s.t > 0.0) {
        Field v(s.u);
        const double f = std::pow(s.t, prm.mu);
        for (double& x : v) x *= f;
        d.entropy = entropy(v, prm, domain, prm.mu);
    }
    return d;
}

/**
 * Integrates from (t_start, u0) through every output time, recording a state at each.
 * A failed step is retried with half the step, at most `max_halvings` times in a row;
 * after a success the step relaxes back towards its nominal value.
 */
inline Trajectory solve(const Field& u0, double t_end, const Parameters& prm, const Domain& domain,
                        const SolverControls& controls, std::span<const double> output_times,
                        double t_start = 0.0, double source = 0.0) {
    DNLE_REQUIRE(prm.regime != Regime::Fast, RegimeError,
                 "the solver does not handle the fast-diffusion regime m(p-1) < 1");
    controls.validate(prm.p);
    domain.check_field(u0, "u0");
    DNLE_REQUIRE(all_finite(u0), InvalidArgument, "initial datum must be finite");
    for (std::size_t i = 0; i < u0.size(); ++i) {
        DNLE_REQUIRE(u0[i] >= -1e-12, InvalidArgument, "initial datum must be nonnegative");
        DNLE_REQUIRE(!domain.is_dirichlet(i) || std::abs(u0[i]) <= 1e-12, InvalidArgument,
                     "initial datum must vanish on the Dirichlet boundary");
    }
    for (std::size_t k = 0; k < output_times.size(); ++k) {
        DNLE_REQUIRE(output_times[k] > t_start && output_times[k] <= t_end * (1 + 1e-14), InvalidArgument,
                     "output times must lie in (t_start, t_end]");
        DNLE_REQUIRE(k == 0 || output_times[k] > output_times[k - 1], InvalidArgument,
                     "output times must be strictly increasing");
    }

    Trajectory traj;
    EvolutionState cur{t_start, domain.zero_boundary(u0)};
    for (double& x : cur.u) x = std::max(x, 0.0);
    traj.states.push_back(cur);
    traj.diagnostics.push_back(diagnose(cur, prm, domain));

    double nominal = controls.dt;
    double dt = controls.dt;
    for (double t_out : output_times) {
        while (cur.t < t_out) {
            const double remaining = t_out - cur.t;
            double h = std::min(dt, remaining);
            if (remaining - h < 1e-12 * std::max(1.0, t_out)) h = remaining;
            int halvings = 0;
            for (;;) {
                try {
                    EvolutionState next = step(cur, h, prm, domain, controls, source);
                    if (h == remaining) next.t = t_out;
                    cur = std::move(next);
                    break;
                } catch (const NonConvergence&) {
                    if (++halvings > controls.max_halvings) throw;
                    h *= 0.5;
                }
            }
            if (halvings > 0) {
                dt = h;
            } else if (dt < nominal) {
                dt = std::min(2.0 * dt, nominal);
            } else if (h == dt) {
                nominal = std::min(nominal * controls.dt_growth, controls.dt_max);
                dt = nominal;
            }
        }
        traj.states.push_back(cur);
        traj.diagnostics.push_back(diagnose(cur, prm, domain));
    }
    return traj;
}

/// v = t^μ u on τ = log t. Every sample must have t > 0.
inline RescaledTrajectory rescale_degenerate(const Trajectory& traj, const Parameters& prm) {
    prm.require(Regime::Degenerate, "rescale_degenerate");
    RescaledTrajectory out;
    for (const auto& s : traj.states) {
        DNLE_REQUIRE(s.t > 0.0, InvalidArgument, "rescaling needs strictly positive times");
        const double factor = std::pow(s.t, prm.mu);
        Field v(s.u);
        for (double& x : v) x *= factor;
        out.time.push_back(std::log(s.t));
        out.v.push_back(std::move(v));
    }
    return out;
}

/// Same, skipping samples at t <= 0 (typically the initial datum).
inline RescaledTrajectory rescale_degenerate_positive(const Trajectory& traj, const Parameters& prm) {
    Trajectory tail;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        if (traj.states[k].t > 0.0) {
            tail.states.push_back(traj.states[k]);
            if (k < traj.diagnostics.size()) tail.diagnostics.push_back(traj.diagnostics[k]);
        }
    }
    return rescale_degenerate(tail, prm);
}

/// v = e^{λ t} u; time is not reparametrized.
inline RescaledTrajectory rescale_quasilinear(const Trajectory& traj, double lambda) {
    RescaledTrajectory out;
    for (const auto& s : traj.states) {
        const double factor = std::exp(lambda * s.t);
        Field v(s.u);
        for (double& x : v) x *= factor;
        out.time.push_back(s.t);
        out.v.push_back(std::move(v));
    }
    return out;
}

/// Decay rate of the backward-Euler separate-variables mode: (1 + λ dt)^{-n} = e^{-rate t_n}.
inline double backward_euler_decay_rate(double lambda, double dt) {
    return std::log1p(lambda * dt) / dt;
}

struct BenilanCrandallReport {
    double min_pointwise = 0.0;   // min over interior nodes and times of u_t + μ u / t
    double max_l1_ratio = 0.0;    // max over times of t ‖u_t‖₁ / ‖u_0‖₁ (theory: <= μ)
    double mu = 0.0;
    bool pointwise_ok = true;
    bool l1_ok = true;
    bool passed() const { return pointwise_ok && l1_ok; }
};

/**
 * Checks u_t >= -μ u / t and ‖u_t‖₁ <= μ ‖u_0‖₁ / t on a trajectory whose first state
 * is the initial datum. u_t + μ u/t = t^{-μ-1} v_τ, so the pointwise test uses centred
 * differences of v = t^μ u in τ = log t; the L¹ test uses centred differences in t.
 */
inline BenilanCrandallReport check_benilan_crandall(const Trajectory& traj, const Parameters& prm,
                                                    const Domain& domain, double slack = 0.0) {
    prm.require(Regime::Degenerate, "check_benilan_crandall");
    DNLE_REQUIRE(traj.size() >= 3, InvalidArgument, "need at least three output times");
    BenilanCrandallReport rep;
    rep.mu = prm.mu;
    rep.min_pointwise = std::numeric_limits<double>::infinity();
    const double mass0 = domain.integrate(traj.states.front().u);
    const double mu = prm.mu;
    for (std::size_t k = 1; k + 1 < traj.size(); ++k) {
        const auto& a = traj.states[k - 1];
        const auto& b = traj.states[k];
        const auto& c = traj.states[k + 1];
        Field ut(b.u.size());
        for (std::size_t i = 0; i < ut.size(); ++i) ut[i] = (c.u[i] - a.u[i]) / (c.t - a.t);
        if (a.t > 0.0) {
            const double ta = std::pow(a.t, mu), tc = std::pow(c.t, mu);
            const double dtau = std::log(c.t) - std::log(a.t);
            const double jac = std::pow(b.t, -mu - 1.0);
            for (std::size_t i = 0; i < ut.size(); ++i) {
                if (domain.is_dirichlet(i)) continue;
                const double vtau = (tc * c.u[i] - ta * a.u[i]) / dtau;
                rep.min_pointwise = std::min(rep.min_pointwise, jac * vtau);
            }
        }
        if (mass0 > 0.0) {
            Field absut(ut.size());
            for (std::size_t i = 0; i < ut.size(); ++i) absut[i] = std::abs(ut[i]);
            rep.max_l1_ratio = std::max(rep.max_l1_ratio, b.t * domain.integrate(absut) / mass0);
        }
    }
    if (!std::isfinite(rep.min_pointwise)) rep.min_pointwise = 0.0;
    rep.pointwise_ok = rep.min_pointwise >= -slack;
    rep.l1_ok = rep.max_l1_ratio <= mu * (1.0 + slack) + 1e-14;
    return rep;
}

/// max over sampled t > 0 of t^μ ‖u(t)‖∞.
inline double smoothing_envelope(const Trajectory& traj, const Parameters& prm) {
    prm.require(Regime::Degenerate, "smoothing_envelope");
    double env = 0.0;
    for (const auto& s : traj.states)
        if (s.t > 0.0) env = std::max(env, std::pow(s.t, prm.mu) * sup_norm(s.u));
    return env;
}

/// Per-sample values of t^μ ‖u(t)‖∞, useful for checking that the envelope stabilises.
inline std::vector<double> smoothing_series(const Trajectory& traj, const Parameters& prm) {
    prm.require(Regime::Degenerate, "smoothing_series");
    std::vector<double> out;
    for (const auto& s : traj.states)
        if (s.t > 0.0) out.push_back(std::pow(s.t, prm.mu) * sup_norm(s.u));
    return out;
}

}  // namespace dnle
