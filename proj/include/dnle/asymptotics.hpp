#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dnle/errors.hpp"
#include "dnle/evolution.hpp"
#include "dnle/grid.hpp"
#include "dnle/operators.hpp"
#include "dnle/selfsimilar.hpp"
#include "dnle/stationary.hpp"

namespace dnle {

struct LinearFit {
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    std::size_t points = 0;
};

/// Least-squares line through (x_k, y_k).
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    DNLE_REQUIRE(x.size() == y.size(), InvalidArgument, "fit_line size mismatch");
    LinearFit fit;
    fit.points = x.size();
    if (x.size() < 2) return fit;
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= double(x.size());
    my /= double(x.size());
    double sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
    }
    if (sxx == 0.0) return fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

// ---------------------------------------------------------------------------
// Degenerate regime: rate of convergence to the separate-variables profile
// ---------------------------------------------------------------------------

struct RateReport {
    std::vector<double> t;
    std::vector<double> error;           // sup |t^μ u - f|
    std::vector<double> weighted_error;  // sup over interior nodes of |t^μ u - f| / f
    LinearFit fit;                       // log(weighted error) against log t
    double fit_t_min = 0.0;
    double fit_t_max = 0.0;
    double C_num = 0.0;                  // max t · weighted error
    bool trivial = false;                // u ≡ 0 on the whole window
};

/**
 * Error series of v = t^μ u against the profile f at every state with t >= t_min.
 * The slope is fitted on [max(t_min, t_last/100), t_last] (the last two decades) unless
 * an explicit window is given.
 */
inline RateReport rate_report_degenerate(const Trajectory& traj, std::span<const double> f, const Parameters& prm,
                                         const Domain& domain, double t_min = 0.0,
                                         std::optional<std::pair<double, double>> fit_window = std::nullopt) {
    prm.require(Regime::Degenerate, "rate_report_degenerate");
    DNLE_REQUIRE(!traj.empty(), InvalidArgument, "empty trajectory");
    domain.check_field(f, "f");
    for (std::size_t i = 0; i < f.size(); ++i)
        DNLE_REQUIRE(domain.is_dirichlet(i) || f[i] > 0.0, InvalidArgument, "profile must be positive in the interior");
    RateReport rep;
    bool all_zero = true;
    for (const auto& s : traj.states) {
        if (!(s.t > 0.0) || s.t < t_min) continue;
        const double scale = std::pow(s.t, prm.mu);
        double e = 0.0, we = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double diff = std::abs(scale * s.u[i] - f[i]);
            e = std::max(e, diff);
            if (!domain.is_dirichlet(i)) we = std::max(we, diff / f[i]);
        }
        if (sup_norm(s.u) > 0.0) all_zero = false;
        rep.t.push_back(s.t);
        rep.error.push_back(e);
        rep.weighted_error.push_back(we);
        rep.C_num = std::max(rep.C_num, s.t * we);
    }
    DNLE_REQUIRE(!rep.t.empty(), InvalidArgument, "no sampled times in the requested window");
    rep.trivial = all_zero;
    rep.fit_t_max = fit_window ? fit_window->second : rep.t.back();
    rep.fit_t_min = fit_window ? fit_window->first : std::max(rep.t.front(), rep.fit_t_max / 100.0);
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < rep.t.size(); ++k) {
        if (rep.t[k] < rep.fit_t_min * (1 - 1e-12) || rep.t[k] > rep.fit_t_max * (1 + 1e-12)) continue;
        if (!(rep.weighted_error[k] > 0.0)) continue;
        lx.push_back(std::log(rep.t[k]));
        ly.push_back(std::log(rep.weighted_error[k]));
    }
    rep.fit = fit_line(lx, ly);
    return rep;
}

// ---------------------------------------------------------------------------
// Degenerate regime: positivity and the two-sided separate-variables bound
// ---------------------------------------------------------------------------

struct PositivityReport {
    std::optional<double> T_inner;     // first sample with u > 0 on every node with d > δ
    std::optional<double> T_boundary;  // first sample with u > 0 on every interior node
    double threshold = 0.0;            // detection level relative to sup u(t)
};

/// u counts as positive at a node when u > threshold · sup u(t).
inline PositivityReport positivity_experiment(const Trajectory& traj, const Domain& domain, double delta,
                                              double threshold = 1e-10) {
    DNLE_REQUIRE(delta > 0.0, InvalidArgument, "delta must be positive");
    DNLE_REQUIRE(threshold >= 0.0, InvalidArgument, "threshold must be nonnegative");
    const Field d = distance_field(domain);
    bool any_inner = false;
    for (std::size_t i = 0; i < d.size(); ++i) any_inner = any_inner || d[i] > delta;
    DNLE_REQUIRE(any_inner, EmptyRegion, "no node lies farther than delta from the boundary");
    PositivityReport rep;
    rep.threshold = threshold;
    for (const auto& s : traj.states) {
        const double level = threshold * sup_norm(s.u);
        bool inner = sup_norm(s.u) > 0.0, all = inner;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (domain.is_dirichlet(i)) continue;
            const bool pos = s.u[i] > level;
            if (!pos) {
                all = false;
                if (d[i] > delta) inner = false;
            }
        }
        if (inner && !rep.T_inner) rep.T_inner = s.t;
        if (all && !rep.T_boundary) {
            rep.T_boundary = s.t;
            break;
        }
    }
    return rep;
}

/**
 * Upper bound for the time at which a Barenblatt subsolution placed under the data
 * (support radius δ, height ε at the centre) reaches radius `reach`:
 * a = (ε δ^N / q^e)^{β(κ-1)}, s = (δ/a)^{1/β}, T = (reach/a)^{1/β} - s.
 */
inline double barenblatt_positivity_bound(const Parameters& prm, double epsilon, double delta, double reach) {
    const auto b = Barenblatt::fitted_below(prm, epsilon, delta);
    return b.time_to_reach(reach);
}

struct SandwichReport {
    double s0 = std::numeric_limits<double>::quiet_NaN();  // lower bound offset (after T4)
    double s1 = std::numeric_limits<double>::quiet_NaN();  // upper bound offset
    double T4 = 0.0;
    bool ok = false;
    std::string reason;
};

/**
 * s1 = largest s with u <= (s+t)^{-μ} f at every interior node and sample;
 * s0 = smallest s with u >= (s+t)^{-μ} f at every interior node and sample with t >= T4.
 */
inline SandwichReport sandwich_check(const Trajectory& traj, std::span<const double> f, const Parameters& prm,
                                     const Domain& domain, double T4) {
    prm.require(Regime::Degenerate, "sandwich_check");
    domain.check_field(f, "f");
    SandwichReport rep;
    rep.T4 = T4;
    double s1 = std::numeric_limits<double>::infinity();
    double s0 = -std::numeric_limits<double>::infinity();
    bool lower_samples = false;
    for (const auto& s : traj.states) {
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (domain.is_dirichlet(i)) continue;
            DNLE_REQUIRE(f[i] > 0.0, InvalidArgument, "profile must be positive in the interior");
            const double u = s.u[i];
            if (u > 0.0) s1 = std::min(s1, std::pow(f[i] / u, 1.0 / prm.mu) - s.t);
            if (s.t >= T4 && s.t > 0.0) {
                lower_samples = true;
                if (!(u > 0.0)) {
                    rep.reason = "u vanishes at an interior node after T4";
                    rep.s1 = s1;
                    return rep;
                }
                s0 = std::max(s0, std::pow(f[i] / u, 1.0 / prm.mu) - s.t);
            }
        }
    }
    rep.s1 = s1;
    rep.s0 = s0;
    if (!lower_samples) {
        rep.reason = "no samples after T4";
        return rep;
    }
    if (!std::isfinite(s1) || !std::isfinite(s0)) {
        rep.reason = "no admissible offset";
        return rep;
    }
    if (s1 <= 0.0) {
        rep.reason = "upper offset is not positive";
        return rep;
    }
    if (s0 < s1) {
        rep.reason = "offsets out of order";
        return rep;
    }
    rep.ok = true;
    return rep;
}

// ---------------------------------------------------------------------------
// Quasilinear regime: envelopes, relative error and barriers
// ---------------------------------------------------------------------------

struct EnvelopeConstants {
    std::vector<double> t;
    std::vector<double> c_upper;  // sup v/S over interior nodes
    std::vector<double> c_lower;  // inf v/S over interior nodes
    double c_upper_inf = 0.0;
    double c_lower_inf = 0.0;

    std::vector<double> gap() const {
        std::vector<double> g(t.size());
        for (std::size_t k = 0; k < t.size(); ++k) g[k] = c_upper[k] - c_lower[k];
        return g;
    }

    /// Largest violation of c_upper non-increasing / c_lower non-decreasing.
    double monotonicity_violation() const {
        double worst = 0.0;
        for (std::size_t k = 1; k < t.size(); ++k) {
            worst = std::max(worst, c_upper[k] - c_upper[k - 1]);
            worst = std::max(worst, c_lower[k - 1] - c_lower[k]);
        }
        return worst;
    }
};

inline EnvelopeConstants envelope_constants(const RescaledTrajectory& traj, std::span<const double> S,
                                            const Domain& domain) {
    domain.check_field(S, "S");
    for (std::size_t i = 0; i < S.size(); ++i)
        DNLE_REQUIRE(domain.is_dirichlet(i) || S[i] > 0.0, InvalidArgument, "S must be positive in the interior");
    EnvelopeConstants env;
    for (std::size_t k = 0; k < traj.v.size(); ++k) {
        double hi = 0.0, lo = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < S.size(); ++i) {
            if (domain.is_dirichlet(i)) continue;
            const double r = traj.v[k][i] / S[i];
            hi = std::max(hi, r);
            lo = std::min(lo, r);
        }
        env.t.push_back(traj.time[k]);
        env.c_upper.push_back(hi);
        env.c_lower.push_back(lo);
    }
    if (!env.t.empty()) {
        env.c_upper_inf = env.c_upper.back();
        env.c_lower_inf = env.c_lower.back();
    }
    return env;
}

/// φ = (v/S)^m - 1 at interior nodes; Dirichlet nodes are set to 0.
inline Field relative_error_field(std::span<const double> v, std::span<const double> S, double m,
                                  const Domain& domain) {
    domain.check_field(v, "v");
    domain.check_field(S, "S");
    Field phi(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (domain.is_dirichlet(i)) continue;
        DNLE_REQUIRE(S[i] > 0.0, InvalidArgument, "S must be positive in the interior");
        phi[i] = std::pow(std::max(v[i], 0.0) / S[i], m) - 1.0;
    }
    return phi;
}

/**
 * Rescaled quasilinear flow v_t = Δ_p v^m + λ v by backward Euler. With λ the discrete
 * eigenvalue of the same grid, every multiple of S = V^{1/m} is an exact fixed point.
 */
inline RescaledTrajectory solve_quasilinear_rescaled(const Field& u0, const Parameters& prm, const Domain& domain,
                                                     const SolverControls& controls, std::span<const double> times,
                                                     double lambda) {
    prm.require(Regime::Quasilinear, "solve_quasilinear_rescaled");
    DNLE_REQUIRE(lambda > 0.0, InvalidArgument, "eigenvalue must be positive");
    DNLE_REQUIRE(controls.dt_max * lambda < 1.0 && controls.dt * lambda < 1.0, InvalidArgument,
                 "dt * lambda must stay below 1");
    DNLE_REQUIRE(!times.empty(), InvalidArgument, "need output times");
    const auto traj = solve(u0, times.back(), prm, domain, controls, times, 0.0, lambda);
    RescaledTrajectory out;
    for (const auto& s : traj.states) {
        out.time.push_back(s.t);
        out.v.push_back(s.u);
    }
    return out;
}

struct QuasilinearReport {
    double c_star = 0.0;
    double c_star_error = 0.0;  // half the final envelope gap
    double final_ref_sup = 0.0;
    EnvelopeConstants envelopes;
    std::vector<double> gap;
    std::vector<double> ref_sup;  // sup |φ(t)| with S = c* V^{1/m}
    bool gap_monotone = true;
};

/// c* from the envelopes of v against V^{1/m}; throws NotConverged if the final gap exceeds `gap_threshold`.
inline QuasilinearReport quasilinear_convergence_report(const RescaledTrajectory& traj, const Eigenpair& eig,
                                                        const Parameters& prm, const Domain& domain,
                                                        double gap_threshold = 0.05) {
    prm.require(Regime::Quasilinear, "quasilinear_convergence_report");
    DNLE_REQUIRE(!traj.v.empty(), InvalidArgument, "empty trajectory");
    Field S1(eig.V.size());
    for (std::size_t i = 0; i < S1.size(); ++i) S1[i] = clamped_pow(eig.V[i], 1.0 / prm.m);
    QuasilinearReport rep;
    rep.envelopes = envelope_constants(traj, S1, domain);
    rep.gap = rep.envelopes.gap();
    rep.c_star = 0.5 * (rep.envelopes.c_upper_inf + rep.envelopes.c_lower_inf);
    rep.c_star_error = 0.5 * rep.gap.back();
    for (std::size_t k = 1; k < rep.gap.size(); ++k)
        if (rep.gap[k] > rep.gap[k - 1] + 1e-8) rep.gap_monotone = false;
    Field S(S1);
    for (double& x : S) x *= rep.c_star;
    for (const auto& v : traj.v) rep.ref_sup.push_back(sup_norm(relative_error_field(v, S, prm.m, domain)));
    rep.final_ref_sup = rep.ref_sup.back();
    if (rep.gap.back() > gap_threshold) {
        throw NotConverged("envelope gap " + fmt(rep.gap.back()) + " above threshold " + fmt(gap_threshold));
    }
    return rep;
}

/// Constants of the eigenfunction V needed by the barrier constructions, measured on the grid.
struct BarrierBounds {
    double p = 2.0;
    double lambda1 = 0.0;
    double C1m = 0.0;  // max V/d, so V <= C1m d
    double C0m = 0.0;  // min V/d, so V >= C0m d
    double xi0 = 0.0;  // regularity radius of d
    double phi_max = 0.0;  // upper bound of the REF φ at the starting time
    double psi_max = 0.0;  // upper bound of ψ = -φ at the starting time
    std::vector<double> face_distance;  // distance to the boundary at each half node
    std::vector<double> face_gradient;  // |∇V| at each half node

    /// min |∇V| over half nodes with distance below ξ (K₁ on Ω_ξ).
    double K1(double xi) const {
        double k = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < face_distance.size(); ++j)
            if (face_distance[j] < xi) k = std::min(k, face_gradient[j]);
        return std::isfinite(k) ? k : 0.0;
    }

    /// max |∇V| over the same set (K₂).
    double K2(double xi) const {
        double k = 0.0;
        for (std::size_t j = 0; j < face_distance.size(); ++j)
            if (face_distance[j] < xi) k = std::max(k, face_gradient[j]);
        return k;
    }

    /// C₁ of the paper's condition: (C1m)^{p-1}, the envelope constant of S = V^{1/m}.
    double C1() const { return std::pow(C1m, p - 1.0); }
};

inline BarrierBounds measure_barrier_bounds(const Eigenpair& eig, double p, const Domain& domain, double phi_max,
                                            double psi_max) {
    BarrierBounds b;
    b.p = p;
    b.lambda1 = eig.lambda1;
    b.xi0 = domain.regularity_radius();
    b.phi_max = phi_max;
    b.psi_max = psi_max;
    double hi = 0.0, lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < eig.V.size(); ++i) {
        if (domain.is_dirichlet(i)) continue;
        const double r = eig.V[i] / distance_to_boundary(domain, domain.node(i));
        hi = std::max(hi, r);
        lo = std::min(lo, r);
    }
    b.C1m = hi;
    b.C0m = lo;
    const auto g = domain.gradient(eig.V);
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double mid = 0.5 * (domain.node(j) + domain.node(j + 1));
        b.face_distance.push_back(distance_to_boundary(domain, mid));
        b.face_gradient.push_back(std::abs(g[j]));
    }
    return b;
}

enum class BarrierKind { Upper, Lower };

/**
 * Upper: Φ = C - B V - A (t - t0) on Σ_Φ = {Φ >= -1, d < ξ, C1m d <= z0(t)/4}.
 * Lower: Ψ = C + B V - A (t - t0) on Σ_Ψ = {0 <= Ψ <= 1/2, d < ξ, C1m d <= z0(t)/4}.
 */
struct BarrierSpec {
    BarrierKind kind = BarrierKind::Upper;
    double A = 0.0, B = 0.0, C = 0.0;
    double xi = 0.0;
    double delta = 0.0;
    double T = 0.0;  // T₁ (upper) or T₂ (lower)
    double t0 = 0.0;
    double omega = 0.0;
    double K1 = 0.0;
    double k2 = 0.0;  // lower bound of |g'(V)|^{p-2}|∇V|^p used by the lower barrier
    double C1m = 0.0;
    double C0m = 0.0;
    double lambda1 = 0.0;
    double p = 2.0;

    /// ωB - (λ₁(C+1) + A(p-1)) ξ^{p-1} for the upper barrier;
    /// 2B(p-1)k₂ (C1m ξ)^{-(p-1)} - λ₁ for the lower one.
    double condition_slack() const {
        if (kind == BarrierKind::Upper)
            return omega * B - (lambda1 * (C + 1.0) + A * (p - 1.0)) * std::pow(xi, p - 1.0);
        return 2.0 * B * (p - 1.0) * k2 * std::pow(C1m * xi, -(p - 1.0)) - lambda1;
    }

    /// z0(t): positive root of the parabola f (upper) or g (lower).
    double z0(double t) const {
        if (kind == BarrierKind::Upper) return (C + 1.0 - A * (t - t0)) / B;
        return (1.0 - C + A * (t - t0)) / B;
    }
};

/**
 * C from the bound of φ, A = 1, then B from ωB = (λ₁(C+1) + A(p-1)) ξ^{p-1} (with a small
 * margin) and ξ shrunk until ξ <= (C+1)/(4 B C1m); finally δ = ε/(2 B C1m) and
 * T₁ = (C - B C1m δ - ε)/A.
 */
inline BarrierSpec choose_upper_barrier(double eps, const BarrierBounds& bounds, double t0 = 0.0) {
    DNLE_REQUIRE(eps > 0.0, InvalidArgument, "eps must be positive");
    DNLE_REQUIRE(bounds.C1m > 0.0 && bounds.lambda1 > 0.0, Infeasible, "eigen bounds must be positive");
    const double p = bounds.p;
    BarrierSpec b;
    b.kind = BarrierKind::Upper;
    b.p = p;
    b.t0 = t0;
    b.lambda1 = bounds.lambda1;
    b.C1m = bounds.C1m;
    b.C0m = bounds.C0m;
    b.C = std::max(1.0, bounds.phi_max + 1.0);
    b.A = 1.0;
    double xi = 0.5 * bounds.xi0;
    for (int it = 0; it < 200; ++it) {
        b.K1 = bounds.K1(xi);
        DNLE_REQUIRE(b.K1 > 0.0, Infeasible, "gradient of V vanishes near the boundary (K1 = 0)");
        b.omega = std::min(1.0, std::pow(2.0, 2.0 - p)) * 2.0 * (p - 1.0) * std::pow(b.K1, p) / bounds.C1();
        b.B = 1.01 * (b.lambda1 * (b.C + 1.0) + b.A * (p - 1.0)) * std::pow(xi, p - 1.0) / b.omega;
        const double cap = (b.C + 1.0) / (4.0 * b.B * b.C1m);
        b.xi = xi;
        if (xi <= cap) break;
        xi = std::min(0.5 * xi, cap);
    }
    DNLE_REQUIRE(b.xi <= (b.C + 1.0) / (4.0 * b.B * b.C1m), Infeasible, "no admissible region radius");
    b.delta = std::min(eps / (2.0 * b.B * b.C1m), 0.5 * b.xi);
    b.T = (b.C - b.B * b.C1m * b.delta - eps) / b.A;
    DNLE_REQUIRE(b.T > 0.0, Infeasible, "barrier horizon T1 is not positive");
    return b;
}

/**
 * C' > 1 from the bound of ψ, A' = B' = 1, then ξ₂ the largest radius with
 * B' C1m ξ₂ <= 1/8 and 2B'(p-1) k₂ (C1m ξ₂)^{-(p-1)} >= λ₁, where
 * k₂ = min{4^{2-p}, (5/4)^{p-2}} K₁^p bounds |g'(V)|^{p-2} |∇V|^p from below on Σ_Ψ.
 */
inline BarrierSpec choose_lower_barrier(double eps, const BarrierBounds& bounds, double t0 = 0.0) {
    DNLE_REQUIRE(eps > 0.0, InvalidArgument, "eps must be positive");
    DNLE_REQUIRE(bounds.C1m > 0.0 && bounds.C0m > 0.0 && bounds.lambda1 > 0.0, Infeasible,
                 "eigen bounds must be positive");
    const double p = bounds.p;
    BarrierSpec b;
    b.kind = BarrierKind::Lower;
    b.p = p;
    b.t0 = t0;
    b.lambda1 = bounds.lambda1;
    b.C1m = bounds.C1m;
    b.C0m = bounds.C0m;
    b.C = std::max(1.25, bounds.psi_max + 0.25);
    b.A = 1.0;
    b.B = 1.0;
    const double factor = std::min(std::pow(4.0, 2.0 - p), std::pow(1.25, p - 2.0));
    double xi = 0.5 * bounds.xi0;
    for (int it = 0; it < 200; ++it) {
        b.K1 = bounds.K1(xi);
        DNLE_REQUIRE(b.K1 > 0.0, Infeasible, "gradient of V vanishes near the boundary (K1 = 0)");
        b.k2 = factor * std::pow(b.K1, p);
        const double cap = std::min(1.0 / (8.0 * b.B * b.C1m),
                                    0.99 * std::pow(2.0 * b.B * (p - 1.0) * b.k2 / b.lambda1, 1.0 / (p - 1.0)) / b.C1m);
        b.xi = xi;
        if (xi <= cap) break;
        xi = std::min(0.5 * xi, cap);
    }
    DNLE_REQUIRE(b.condition_slack() >= 0.0, Infeasible, "no admissible region radius for the lower barrier");
    b.delta = std::min(eps / (2.0 * b.B * b.C0m), 0.5 * b.xi);
    b.T = (b.C + b.B * b.C0m * b.delta - eps) / b.A;
    DNLE_REQUIRE(b.T > 0.0, Infeasible, "barrier horizon T2 is not positive");
    return b;
}

struct BarrierResidual {
    double min_residual = std::numeric_limits<double>::infinity();
    std::size_t points = 0;
};

/**
 * Minimum over Σ of LHS - RHS of the supersolution inequality of the REF equation,
 *   upper: (p-1)(1+Φ)^{p-2} Φ_t - V^{-(p-1)} Δ_p((Φ+1)V) - λ₁(Φ+1)^{p-1},
 *   lower: -(p-1)(1-Ψ)^{p-2} Ψ_t - V^{-(p-1)} Δ_p((1-Ψ)V) - λ₁(1-Ψ)^{p-1},
 * with Δ_p the discrete operator, sampled at `samples` times across the life of Σ.
 */
inline BarrierResidual barrier_residual(const BarrierSpec& b, std::span<const double> V, double lambda1, double p,
                                        const Domain& domain, std::size_t samples = 64) {
    domain.check_field(V, "V");
    DNLE_REQUIRE(samples >= 2, InvalidArgument, "need at least two time samples");
    const FluxRegularization reg = FluxRegularization::defaults_for(p);
    const Field d = distance_field(domain);
    const bool upper = b.kind == BarrierKind::Upper;
    double Vmax = sup_norm(V);
    // life span of Σ after t0
    double t_lo = 0.0, t_hi = 0.0;
    if (b.A > 0.0) {
        if (upper) {
            t_hi = (b.C + 1.0) / b.A;
        } else {
            t_lo = std::max(0.0, (b.C - 0.5) / b.A);
            t_hi = (b.C + b.B * Vmax) / b.A;
        }
    } else {
        t_hi = 1.0;
    }
    BarrierResidual out;
    Field W(V.size());
    for (std::size_t k = 0; k < samples; ++k) {
        const double tau = t_lo + (t_hi - t_lo) * double(k) / double(samples);
        const double t = b.t0 + tau;
        const double z0 = b.B > 0.0 ? b.z0(t) : std::numeric_limits<double>::infinity();
        Field bar(V.size());
        for (std::size_t i = 0; i < V.size(); ++i) {
            bar[i] = upper ? b.C - b.B * V[i] - b.A * tau : b.C + b.B * V[i] - b.A * tau;
            W[i] = (upper ? bar[i] + 1.0 : 1.0 - bar[i]) * V[i];
        }
        const Field lap = discrete_p_laplacian(domain, W, p, reg);
        for (std::size_t i = 0; i < V.size(); ++i) {
            if (domain.is_dirichlet(i) || !(V[i] > 0.0)) continue;
            if (d[i] >= b.xi) continue;
            if (!(z0 > 0.0) || b.C1m * d[i] > 0.25 * z0) continue;
            const double base = upper ? bar[i] + 1.0 : 1.0 - bar[i];
            if (upper ? bar[i] < -1.0 : (bar[i] < 0.0 || bar[i] > 0.5)) continue;
            const double dt_bar = -b.A;
            const double lhs = upper ? (p - 1.0) * std::pow(base, p - 2.0) * dt_bar
                                     : -(p - 1.0) * std::pow(base, p - 2.0) * dt_bar;
            const double rhs = std::pow(V[i], -(p - 1.0)) * lap[i] + lambda1 * std::pow(base, p - 1.0);
            out.min_residual = std::min(out.min_residual, lhs - rhs);
            ++out.points;
        }
    }
    if (out.points == 0) throw EmptyRegion("no grid point falls inside the barrier region");
    return out;
}

}  // namespace dnle
