#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dnle/errors.hpp"
#include "dnle/evolution.hpp"
#include "dnle/grid.hpp"
#include "dnle/operators.hpp"
#include "dnle/tridiagonal.hpp"

namespace dnle {

enum class ProfileMethod { MinimizeJ, LongTimeLimit };

inline const char* to_string(ProfileMethod m) {
    return m == ProfileMethod::MinimizeJ ? "minimize_J" : "long_time_limit";
}

/// Solution of Δ_p f^m + μ f = 0 on the grid, with its boundary envelope constants.
struct StationaryProfile {
    Field f;
    Field w;  // f^m
    double residual_norm = 0.0;
    double C1 = 0.0;
    double C2 = 0.0;
    int iterations = 0;
    ProfileMethod method = ProfileMethod::MinimizeJ;
};

/// First Dirichlet eigenpair of -Δ_p, normalized so that max V = 1.
struct Eigenpair {
    double lambda1 = 0.0;
    Field V;
    double residual_norm = 0.0;
    int iterations = 0;
};

struct StationaryControls {
    double tolerance = 1e-8;
    int max_descent_iterations = 20000;
    int max_newton_iterations = 60;
    double descent_gradient_tolerance = 1e-6;
    double armijo_initial_step = 1.0;
    double armijo_shrink = 0.5;
    double armijo_c = 1e-4;
    double long_time_dtau = 0.5;  // in units of 1/μ
    int max_long_time_steps = 200000;
};

namespace detail {

// Stiffness matrix of -Δ (p = 2) scaled by cell volumes, restricted to interior nodes;
// Dirichlet rows are identity. Symmetric positive definite.
inline Tridiagonal laplace_preconditioner(const Domain& domain) {
    const std::size_t n = domain.size_nodes();
    const auto area = domain.face_areas();
    const double h = domain.spacing();
    Tridiagonal k(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (domain.is_dirichlet(i)) {
            k.set_identity_row(i);
            continue;
        }
        const double kr = i + 1 < n ? area[i] / h : 0.0;
        const double kl = i > 0 ? area[i - 1] / h : 0.0;
        k.diag[i] = kr + kl;
        if (i + 1 < n && !domain.is_dirichlet(i + 1)) k.upper[i] = -kr;
        if (i > 0 && !domain.is_dirichlet(i - 1)) k.lower[i] = -kl;
    }
    return k;
}

inline double weighted_dot(const Domain& domain, std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!domain.is_dirichlet(i)) s += a[i] * b[i];
    return s;
}

// Residual L(w) + μ w^{1/m} at interior nodes.
inline Field profile_residual(const Domain& domain, const Parameters& prm, std::span<const double> w,
                              FluxRegularization reg) {
    Field r = discrete_p_laplacian(domain, w, prm.p, reg);
    for (std::size_t i = 0; i < w.size(); ++i)
        r[i] = domain.is_dirichlet(i) ? 0.0 : r[i] + prm.mu * clamped_pow(w[i], 1.0 / prm.m);
    return r;
}

inline Field eigen_residual(const Domain& domain, double p, double lambda, std::span<const double> v,
                            FluxRegularization reg) {
    Field r = discrete_p_laplacian(domain, v, p, reg);
    for (std::size_t i = 0; i < v.size(); ++i)
        r[i] = domain.is_dirichlet(i) ? 0.0 : r[i] + lambda * clamped_pow(v[i], p - 1.0);
    return r;
}

inline Field positive_bump(const Domain& domain) {
    const double L = domain.size();
    if (domain.geometry() == Geometry::Interval)
        return domain.sample([L](double x) { return std::sin(std::numbers::pi * x / L); });
    return domain.sample([L](double r) { return std::cos(0.5 * std::numbers::pi * r / L); });
}

inline void normalize_max(Field& v) {
    const double s = sup_norm(v);
    DNLE_REQUIRE(s > 0.0, NonConvergence, "iterate collapsed to zero");
    for (double& x : v) x /= s;
}

}  // namespace detail

/// J(w) = (1/p)∫|∇w|^p - (m/(m+1)) μ ∫ w^{(m+1)/m}.
inline double functional_J(std::span<const double> w, const Parameters& prm, const Domain& domain) {
    prm.require(Regime::Degenerate, "functional_J");
    domain.check_field(w, "w");
    auto g = domain.gradient(w);
    for (double& x : g) x = std::pow(std::abs(x), prm.p);
    Field power(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) power[i] = clamped_pow(w[i], (prm.m + 1.0) / prm.m);
    return domain.integrate_faces(g) / prm.p - prm.m / (prm.m + 1.0) * prm.mu * domain.integrate(power);
}

/// ∫|∇φ|^p / ∫|φ|^p.
inline double rayleigh_quotient(std::span<const double> phi, double p, const Domain& domain) {
    domain.check_field(phi, "phi");
    DNLE_REQUIRE(p > 1.0, InvalidArgument, "p must exceed 1");
    Field a(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) a[i] = std::pow(std::abs(phi[i]), p);
    const double denom = domain.integrate(a);
    DNLE_REQUIRE(denom > 0.0, InvalidArgument, "Rayleigh quotient of the zero function");
    auto g = domain.gradient(phi);
    for (double& x : g) x = std::pow(std::abs(x), p);
    return domain.integrate_faces(g) / denom;
}

/// C1 = min f/d^{1/m}, C2 = max f/d^{1/m} over interior nodes.
inline std::pair<double, double> boundary_growth_check(std::span<const double> f, const Domain& domain,
                                                       double m) {
    domain.check_field(f, "f");
    DNLE_REQUIRE(m > 0.0, InvalidArgument, "m must be positive");
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (domain.is_dirichlet(i)) continue;
        DNLE_REQUIRE(f[i] > 0.0, InvalidArgument, "profile must be positive at interior nodes");
        const double ratio = f[i] / std::pow(distance_to_boundary(domain, domain.node(i)), 1.0 / m);
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    return {lo, hi};
}

/// Smallest inward one-sided slope of w over the Dirichlet nodes.
inline double boundary_principle_check(std::span<const double> w, const Domain& domain) {
    domain.check_field(w, "w");
    const std::size_t n = w.size();
    const double h = domain.spacing();
    double slope = std::numeric_limits<double>::infinity();
    if (domain.is_dirichlet(0)) slope = std::min(slope, (w[1] - w[0]) / h);
    if (domain.is_dirichlet(n - 1)) slope = std::min(slope, (w[n - 2] - w[n - 1]) / h);
    return slope;
}

/**
 * Minimizes J over w >= 0 by projected gradient descent in the metric of -Δ (Armijo
 * backtracking), then polishes with Newton on Δ_p w + μ w^{1/m} = 0.
 */
inline StationaryProfile profile_by_minimization(const Parameters& prm, const Domain& domain,
                                                 const StationaryControls& ctl, const Field* guess = nullptr) {
    const FluxRegularization reg = FluxRegularization::defaults_for(prm.p);
    Field w = guess ? domain.zero_boundary(*guess) : detail::positive_bump(domain);
    for (double& x : w) x = std::max(x, 0.0);
    DNLE_REQUIRE(sup_norm(w) > 0.0, InvalidArgument, "initial guess must be nontrivial");
    {
        // optimal multiple of the initial shape: c^{p-1-1/m} = μ∫w^{(m+1)/m} / ∫|∇w|^p
        auto g = domain.gradient(w);
        for (double& x : g) x = std::pow(std::abs(x), prm.p);
        Field power(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) power[i] = clamped_pow(w[i], (prm.m + 1.0) / prm.m);
        const double c = std::pow(prm.mu * domain.integrate(power) / domain.integrate_faces(g),
                                  1.0 / (prm.p - 1.0 - 1.0 / prm.m));
        for (double& x : w) x *= c;
    }
    const auto precond = detail::laplace_preconditioner(domain);
    const auto vol = domain.cell_volumes();
    double J = functional_J(w, prm, domain);
    int iterations = 0;
    double step0 = ctl.armijo_initial_step;
    for (; iterations < ctl.max_descent_iterations; ++iterations) {
        Field r = detail::profile_residual(domain, prm, w, reg);
        Field grad(w.size(), 0.0);
        for (std::size_t i = 0; i < w.size(); ++i) grad[i] = -domain.sphere_measure() * vol[i] * r[i];
        Field dir = solve(precond, grad);
        const double slope = detail::weighted_dot(domain, grad, dir);
        if (slope <= ctl.descent_gradient_tolerance * ctl.descent_gradient_tolerance * std::max(1.0, std::abs(J)))
            break;
        double s = step0;
        bool accepted = false;
        for (int k = 0; k < 60; ++k, s *= ctl.armijo_shrink) {
            Field trial(w);
            for (std::size_t i = 0; i < w.size(); ++i) trial[i] = std::max(w[i] - s * dir[i], 0.0);
            const double Jt = functional_J(trial, prm, domain);
            if (Jt <= J - ctl.armijo_c * s * slope) {
                w = std::move(trial);
                J = Jt;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        step0 = std::min(ctl.armijo_initial_step, 2.0 * s);
    }

    for (int it = 0; it < ctl.max_newton_iterations; ++it) {
        Field r = detail::profile_residual(domain, prm, w, reg);
        const double rn = sup_norm(r);
        if (rn <= ctl.tolerance) break;
        Tridiagonal jac = p_laplacian_jacobian(domain, w, prm.p, reg);
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (domain.is_dirichlet(i)) {
                jac.set_identity_row(i);
                continue;
            }
            jac.diag[i] += prm.mu * clamped_pow_derivative(w[i], 1.0 / prm.m);
            if (i > 0 && domain.is_dirichlet(i - 1)) jac.lower[i] = 0.0;
            if (i + 1 < w.size() && domain.is_dirichlet(i + 1)) jac.upper[i] = 0.0;
        }
        Field delta;
        try {
            delta = solve(jac, r);
        } catch (const NonConvergence&) {
            break;
        }
        double theta = 1.0;
        bool accepted = false;
        for (int k = 0; k < 30; ++k, theta *= 0.5) {
            Field trial(w);
            for (std::size_t i = 0; i < w.size(); ++i) trial[i] = std::max(w[i] - theta * delta[i], 0.0);
            const double tn = sup_norm(detail::profile_residual(domain, prm, trial, reg));
            if (tn < rn) {
                w = std::move(trial);
                accepted = true;
                break;
            }
        }
        ++iterations;
        if (!accepted) break;
    }

    StationaryProfile out;
    out.w = domain.zero_boundary(w);
    out.residual_norm = sup_norm(detail::profile_residual(domain, prm, out.w, reg));
    out.iterations = iterations;
    out.method = ProfileMethod::MinimizeJ;
    out.f.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out.f[i] = clamped_pow(out.w[i], 1.0 / prm.m);
    return out;
}

/**
 * Evolves the rescaled equation v_τ = Δ_p v^m + μ v implicitly from a positive bump until
 * the discrete ‖v_τ‖∞ falls below the tolerance.
 */
inline StationaryProfile profile_by_long_time_limit(const Parameters& prm, const Domain& domain,
                                                    const StationaryControls& ctl, const Field* guess = nullptr) {
    SolverControls sc = SolverControls::defaults_for(prm.p);
    sc.tolerance = 1e-11;
    const double dtau = ctl.long_time_dtau / prm.mu;
    EvolutionState state{0.0, guess ? domain.zero_boundary(*guess) : detail::positive_bump(domain)};
    for (double& x : state.u) x = std::max(x, 0.0);
    DNLE_REQUIRE(sup_norm(state.u) > 0.0, InvalidArgument, "initial guess must be nontrivial");
    int steps = 0;
    double rate = std::numeric_limits<double>::infinity();
    for (; steps < ctl.max_long_time_steps && rate > ctl.tolerance; ++steps) {
        EvolutionState next = step(state, dtau, prm, domain, sc, prm.mu);
        double d = 0.0;
        for (std::size_t i = 0; i < next.u.size(); ++i) d = std::max(d, std::abs(next.u[i] - state.u[i]));
        rate = d / dtau;
        state = std::move(next);
    }
    StationaryProfile out;
    out.f = state.u;
    out.w.resize(out.f.size());
    for (std::size_t i = 0; i < out.f.size(); ++i) out.w[i] = clamped_pow(out.f[i], prm.m);
    out.residual_norm = sup_norm(detail::profile_residual(domain, prm, out.w, sc.reg));
    out.iterations = steps;
    out.method = ProfileMethod::LongTimeLimit;
    return out;
}

/// Residual-certified asymptotic profile f. Throws NonConvergence when the residual stays above tolerance.
inline StationaryProfile compute_profile_f(const Parameters& prm, const Domain& domain, ProfileMethod method,
                                           double tolerance = 1e-8, const Field* guess = nullptr) {
    prm.require(Regime::Degenerate, "compute_profile_f");
    DNLE_REQUIRE(tolerance > 0.0, InvalidArgument, "tolerance must be positive");
    StationaryControls ctl;
    ctl.tolerance = tolerance;
    StationaryProfile out = method == ProfileMethod::MinimizeJ
                                ? profile_by_minimization(prm, domain, ctl, guess)
                                : profile_by_long_time_limit(prm, domain, ctl, guess);
    if (!(out.residual_norm <= tolerance)) {
        throw NonConvergence(std::string("stationary profile (") + to_string(method) +
                             ") residual " + fmt(out.residual_norm) + " above tolerance");
    }
    for (std::size_t i = 0; i < out.f.size(); ++i)
        DNLE_REQUIRE(domain.is_dirichlet(i) || out.f[i] > 0.0, NonConvergence,
                     "stationary profile is not positive in the interior");
    std::tie(out.C1, out.C2) = boundary_growth_check(out.f, domain, prm.m);
    return out;
}

/**
 * First eigenpair of -Δ_p. The discrete p = 2 eigenvector (inverse iteration) seeds a
 * projected descent on the Rayleigh quotient in the metric of -Δ; a bordered Newton
 * iteration with V fixed to 1 at its maximum then polishes (λ₁, V).
 */
inline Eigenpair compute_first_eigenpair(double p, const Domain& domain, double tolerance = 1e-8,
                                         const Field* guess = nullptr) {
    DNLE_REQUIRE(p > 1.0, InvalidArgument, "p must exceed 1");
    DNLE_REQUIRE(tolerance > 0.0, InvalidArgument, "tolerance must be positive");
    const FluxRegularization reg = FluxRegularization::defaults_for(p);
    const auto precond = detail::laplace_preconditioner(domain);
    const auto vol = domain.cell_volumes();
    const std::size_t n = domain.size_nodes();
    int iterations = 0;

    Field v;
    if (guess) {
        v = domain.zero_boundary(*guess);
        for (double& x : v) x = std::abs(x);
    } else {
        // inverse iteration for the p = 2 mode: K v_{k+1} = M v_k
        v = detail::positive_bump(domain);
        for (int k = 0; k < 200; ++k) {
            Field rhs(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) rhs[i] = domain.is_dirichlet(i) ? 0.0 : vol[i] * v[i];
            Field next = solve(precond, rhs);
            detail::normalize_max(next);
            double d = 0.0;
            for (std::size_t i = 0; i < n; ++i) d = std::max(d, std::abs(next[i] - v[i]));
            v = std::move(next);
            if (d < 1e-14) break;
        }
    }
    detail::normalize_max(v);

    double R = rayleigh_quotient(v, p, domain);
    if (p != 2.0) {
        double step0 = 1.0;
        for (; iterations < 20000; ++iterations) {
            // ∇R ∝ -vol (Δ_p v + R v^{p-1})
            Field res = detail::eigen_residual(domain, p, R, v, reg);
            Field grad(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) grad[i] = -vol[i] * res[i];
            Field dir = solve(precond, grad);
            const double slope = detail::weighted_dot(domain, grad, dir);
            if (slope <= 1e-20 * R * R) break;
            Field vp(n);
            for (std::size_t i = 0; i < n; ++i) vp[i] = clamped_pow(v[i], p);
            const double scale = p * domain.sphere_measure() / domain.integrate(vp);
            double s = step0;
            bool accepted = false;
            for (int k = 0; k < 60; ++k, s *= 0.5) {
                Field trial(v);
                for (std::size_t i = 0; i < n; ++i) trial[i] = std::max(v[i] - s * dir[i], 0.0);
                if (sup_norm(trial) == 0.0) continue;
                const double Rt = rayleigh_quotient(trial, p, domain);
                if (Rt <= R - 1e-4 * s * slope * scale) {
                    v = std::move(trial);
                    detail::normalize_max(v);
                    R = Rt;
                    accepted = true;
                    break;
                }
            }
            if (!accepted) break;
            step0 = 2.0 * s;
            if (sup_norm(detail::eigen_residual(domain, p, R, v, reg)) < 1e-3 * R) break;
        }
    }

    double lambda = R;
    for (int it = 0; it < 60; ++it) {
        Field res = detail::eigen_residual(domain, p, lambda, v, reg);
        const double rn = sup_norm(res);
        if (rn <= tolerance) break;
        const std::size_t k = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
        Tridiagonal jac = p_laplacian_jacobian(domain, v, p, reg);
        Field col(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (domain.is_dirichlet(i)) {
                jac.set_identity_row(i);
                continue;
            }
            jac.diag[i] += lambda * clamped_pow_derivative(v[i], p - 1.0);
            if (i > 0 && domain.is_dirichlet(i - 1)) jac.lower[i] = 0.0;
            if (i + 1 < n && domain.is_dirichlet(i + 1)) jac.upper[i] = 0.0;
            col[i] = clamped_pow(v[i], p - 1.0);
        }
        Field delta;
        try {
            delta = solve_column_replaced(jac, k, col, res);
        } catch (const NonConvergence&) {
            break;
        }
        double theta = 1.0;
        bool accepted = false;
        for (int j = 0; j < 30; ++j, theta *= 0.5) {
            Field trial(v);
            for (std::size_t i = 0; i < n; ++i)
                if (i != k) trial[i] = std::max(v[i] - theta * delta[i], 0.0);
            const double lt = lambda - theta * delta[k];
            if (sup_norm(detail::eigen_residual(domain, p, lt, trial, reg)) < rn) {
                v = std::move(trial);
                lambda = lt;
                accepted = true;
                break;
            }
        }
        ++iterations;
        if (!accepted) break;
    }
    detail::normalize_max(v);
    Eigenpair out;
    out.V = domain.zero_boundary(v);
    out.lambda1 = lambda;
    out.residual_norm = sup_norm(detail::eigen_residual(domain, p, lambda, out.V, reg));
    out.iterations = iterations;
    if (!(out.residual_norm <= tolerance)) {
        throw NonConvergence("eigenpair residual " + fmt(out.residual_norm) + " above tolerance");
    }
    for (std::size_t i = 0; i < n; ++i)
        DNLE_REQUIRE(domain.is_dirichlet(i) || out.V[i] > 0.0, NonConvergence,
                     "eigenfunction is not positive in the interior");
    return out;
}

}  // namespace dnle
