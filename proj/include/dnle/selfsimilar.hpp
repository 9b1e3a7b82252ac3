#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dnle/errors.hpp"
#include "dnle/grid.hpp"
#include "dnle/operators.hpp"

namespace dnle {

/// (κ-1)α + pβ - 1.
inline double check_alpha_beta(double alpha, double beta, const Parameters& prm) {
    prm.require(Regime::Degenerate, "check_alpha_beta");
    return (prm.kappa - 1.0) * alpha + prm.p * beta - 1.0;
}

enum class SelfSimilarCase { SeparateVariables, Barenblatt, Intermediate, SlowDecay };

inline const char* to_string(SelfSimilarCase c) {
    switch (c) {
        case SelfSimilarCase::SeparateVariables: return "separate_variables";
        case SelfSimilarCase::Barenblatt: return "barenblatt";
        case SelfSimilarCase::Intermediate: return "intermediate";
        case SelfSimilarCase::SlowDecay: return "slow_decay";
    }
    return "unknown";
}

/// U(t,x) = (t+s)^{-α} h(|x| (t+s)^{-β}) with h(0) = M.
struct SelfSimilarSpec {
    double alpha = 0.0;
    double beta = 0.0;
    double s = 0.0;
    double M = 1.0;

    /// Spec on the constraint line with the given β.
    static SelfSimilarSpec from_beta(double beta, const Parameters& prm, double M = 1.0, double s = 0.0) {
        prm.require(Regime::Degenerate, "SelfSimilarSpec");
        return {(1.0 - prm.p * beta) / (prm.kappa - 1.0), beta, s, M};
    }

    SelfSimilarCase classify(const Parameters& prm, double tol = 1e-12) const {
        if (beta == 0.0) return SelfSimilarCase::SeparateVariables;
        const double gap = alpha - beta * prm.N;
        if (std::abs(gap) <= tol * std::max(1.0, std::abs(alpha))) return SelfSimilarCase::Barenblatt;
        return gap > 0.0 ? SelfSimilarCase::Intermediate : SelfSimilarCase::SlowDecay;
    }
};

struct BarenblattConstants {
    double alpha = 0.0;
    double beta = 0.0;
    double q = 0.0;          // coefficient inside the bracket, verified against the PDE
    double q_printed = 0.0;  // the same quantity without the 1/m factor
    double c_printed = 0.0;  // q_printed^{(p-1)/(κ-1)}, the prefactor form
};

/// α_B = 1/(κ-1+p/N), β_B = α_B/N and q = ((κ-1)/(mp)) (α_B/N)^{1/(p-1)}.
inline BarenblattConstants barenblatt_constants(const Parameters& prm) {
    prm.require(Regime::Degenerate, "barenblatt_constants");
    const double n = prm.N;
    DNLE_REQUIRE(prm.kappa + prm.p / n > 1.0, InvalidArgument, "parameters outside the good range");
    BarenblattConstants c;
    c.alpha = 1.0 / (prm.kappa - 1.0 + prm.p / n);
    c.beta = c.alpha / n;
    const double base = std::pow(c.alpha / n, 1.0 / (prm.p - 1.0));
    c.q = (prm.kappa - 1.0) / (prm.m * prm.p) * base;
    c.q_printed = (prm.kappa - 1.0) / prm.p * base;
    c.c_printed = std::pow(c.q_printed, (prm.p - 1.0) / (prm.kappa - 1.0));
    return c;
}

/**
 * U(t,x) = T^{-α} (q (a^{p'} - ξ^{p'}))_+^{e},  T = t + s,  ξ = |x| T^{-β},
 * p' = p/(p-1), e = (p-1)/(κ-1).
 */
class Barenblatt {
public:
    Barenblatt(const Parameters& prm, double a, double s, std::optional<double> q = std::nullopt)
        : prm_(prm), consts_(barenblatt_constants(prm)), a_(a), s_(s) {
        DNLE_REQUIRE(a > 0.0, InvalidArgument, "Barenblatt radius parameter must be positive");
        DNLE_REQUIRE(s >= 0.0, InvalidArgument, "time offset must be nonnegative");
        q_ = q.value_or(consts_.q);
        DNLE_REQUIRE(q_ > 0.0, InvalidArgument, "Barenblatt coefficient must be positive");
        pp_ = prm.p / (prm.p - 1.0);
        e_ = (prm.p - 1.0) / (prm.kappa - 1.0);
    }

    /// Barenblatt with h(0) = M, i.e. value M at the centre when T = 1.
    static Barenblatt with_height(const Parameters& prm, double M, double s) {
        const auto c = barenblatt_constants(prm);
        const double a = std::pow(std::pow(M, 1.0 / ((prm.p - 1.0) / (prm.kappa - 1.0))) / c.q,
                                  (prm.p - 1.0) / prm.p);
        return Barenblatt(prm, a, s);
    }

    /**
     * Barenblatt whose initial datum has support radius δ and maximum ε:
     * a = (ε δ^N / q^e)^{β(κ-1)}, s = (δ/a)^{1/β}.
     */
    static Barenblatt fitted_below(const Parameters& prm, double epsilon, double delta) {
        DNLE_REQUIRE(epsilon > 0.0 && delta > 0.0, InvalidArgument, "epsilon and delta must be positive");
        const auto c = barenblatt_constants(prm);
        const double e = (prm.p - 1.0) / (prm.kappa - 1.0);
        const double a = std::pow(epsilon * std::pow(delta, prm.N) / std::pow(c.q, e), c.beta * (prm.kappa - 1.0));
        const double s = std::pow(delta / a, 1.0 / c.beta);
        return Barenblatt(prm, a, s);
    }

    double value(double r, double t) const {
        const double T = time(t);
        const double xi = std::abs(r) * std::pow(T, -consts_.beta);
        const double bracket = q_ * (std::pow(a_, pp_) - std::pow(xi, pp_));
        if (bracket <= 0.0) return 0.0;
        return std::pow(T, -consts_.alpha) * std::pow(bracket, e_);
    }

    /// ∂U/∂t = T^{-α-1} [-α B^e + e q p' β ξ^{p'} B^{e-1}] with B the bracket.
    double time_derivative(double r, double t) const {
        const double T = time(t);
        const double xi = std::abs(r) * std::pow(T, -consts_.beta);
        const double bracket = q_ * (std::pow(a_, pp_) - std::pow(xi, pp_));
        if (bracket <= 0.0) return 0.0;
        return std::pow(T, -consts_.alpha - 1.0) *
               (-consts_.alpha * std::pow(bracket, e_) +
                e_ * q_ * pp_ * consts_.beta * std::pow(xi, pp_) * std::pow(bracket, e_ - 1.0));
    }

    double support_radius(double t) const { return a_ * std::pow(time(t), consts_.beta); }

    /// Time at which the support radius reaches `radius`.
    double time_to_reach(double radius) const { return std::pow(radius / a_, 1.0 / consts_.beta) - s_; }

    /// ∫ U over R^N (radial quadrature with `samples` midpoints).
    double mass(double t, std::size_t samples = 20000) const {
        const double R = support_radius(t);
        const double n = prm_.N;
        const double sphere = 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
        double sum = 0.0;
        const double dr = R / double(samples);
        for (std::size_t k = 0; k < samples; ++k) {
            const double r = (double(k) + 0.5) * dr;
            sum += value(r, t) * std::pow(r, n - 1.0);
        }
        return sphere * sum * dr;
    }

    double a() const { return a_; }
    double s() const { return s_; }
    double q() const { return q_; }
    double alpha() const { return consts_.alpha; }
    double beta() const { return consts_.beta; }
    const Parameters& parameters() const { return prm_; }

private:
    double time(double t) const {
        const double T = t + s_;
        DNLE_REQUIRE(T > 0.0, InvalidArgument, "Barenblatt evaluated at t + s <= 0");
        return T;
    }

    Parameters prm_;
    BarenblattConstants consts_;
    double a_, s_, q_, pp_, e_;
};

/**
 * max |U_t - Δ_p U^m| over nodes of a radial domain with inner·a(t) <= r <= outer·a(t),
 * a(t) the support radius. The upper cut keeps away from the free boundary; the lower
 * cut keeps away from the centre, where U^m is only C^{1,1/(p-1)} when p > 2.
 */
inline double barenblatt_residual(const Barenblatt& b, const Domain& domain, double t, double inner = 0.0,
                                  double outer = 0.8) {
    const auto& prm = b.parameters();
    Field w(domain.size_nodes());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::pow(b.value(domain.node(i), t), prm.m);
    const auto lap = discrete_p_laplacian(domain, w, prm.p, FluxRegularization::defaults_for(prm.p));
    const double R = b.support_radius(t);
    double res = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double r = domain.node(i);
        if (domain.is_dirichlet(i) || r > outer * R || r < inner * R) continue;
        any = true;
        res = std::max(res, std::abs(b.time_derivative(r, t) - lap[i]));
    }
    DNLE_REQUIRE(any, EmptyRegion, "no grid node inside the residual window");
    return res;
}

/// Radial profile g = h^m sampled on [0, a] (or [0, r_max] when g stays positive).
struct ProfileCurve {
    std::vector<double> r;
    std::vector<double> g;
    std::vector<double> dg;
    std::optional<double> support_radius;
    std::optional<double> crossing_slope;
    SelfSimilarCase kind = SelfSimilarCase::Intermediate;
    double m = 1.0;

    /// Cubic Hermite interpolation of g; zero beyond the support.
    double g_at(double x) const {
        DNLE_REQUIRE(!r.empty(), InvalidArgument, "empty profile curve");
        if (x <= r.front()) return g.front();
        if (support_radius && x >= *support_radius) return 0.0;
        DNLE_REQUIRE(x <= r.back() * (1.0 + 1e-12), InvalidArgument, "radius beyond the integrated range");
        x = std::min(x, r.back());
        const auto it = std::upper_bound(r.begin(), r.end(), x);
        const std::size_t k1 = std::min<std::size_t>(std::size_t(it - r.begin()), r.size() - 1);
        const std::size_t k0 = k1 - 1;
        const double h = r[k1] - r[k0];
        const double s = (x - r[k0]) / h;
        const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
        const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
        return h00 * g[k0] + h10 * h * dg[k0] + h01 * g[k1] + h11 * h * dg[k1];
    }

    double h_at(double x) const { return clamped_pow(g_at(x), 1.0 / m); }
};

struct ProfileControls {
    double rtol = 1e-11;
    double atol = 1e-14;
    double first_step_fraction = 1e-6;
    double event_tolerance = 1e-10;
    std::size_t max_steps = 2000000;
    bool require_crossing = false;
};

namespace detail {

struct ProfileOde {
    const Parameters& prm;
    double alpha, beta;

    double flux(double r, double g, double I) const {
        const double n = prm.N;
        return -beta * r * clamped_pow(g, 1.0 / prm.m) - (alpha - beta * n) * I / std::pow(r, n - 1.0);
    }

    double slope(double r, double g, double I) const {
        const double F = flux(r, g, I);
        if (F == 0.0) return 0.0;
        return std::copysign(std::pow(std::abs(F), 1.0 / (prm.p - 1.0)), F);
    }

    std::array<double, 2> rhs(double r, const std::array<double, 2>& y) const {
        return {slope(r, y[0], y[1]), std::pow(r, prm.N - 1.0) * clamped_pow(y[0], 1.0 / prm.m)};
    }
};

// One Dormand-Prince 5(4) step; returns the 5th-order solution and an error estimate.
inline std::array<double, 2> dp45_step(const ProfileOde& ode, double r, const std::array<double, 2>& y, double h,
                                       std::array<double, 2>& err) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    auto add = [](const std::array<double, 2>& base, std::initializer_list<std::pair<double, const std::array<double, 2>*>> terms,
                  double hh) {
        std::array<double, 2> out = base;
        for (const auto& [c, k] : terms)
            for (int j = 0; j < 2; ++j) out[j] += hh * c * (*k)[j];
        return out;
    };
    const auto k1 = ode.rhs(r, y);
    const auto k2 = ode.rhs(r + c2 * h, add(y, {{a21, &k1}}, h));
    const auto k3 = ode.rhs(r + c3 * h, add(y, {{a31, &k1}, {a32, &k2}}, h));
    const auto k4 = ode.rhs(r + c4 * h, add(y, {{a41, &k1}, {a42, &k2}, {a43, &k3}}, h));
    const auto k5 = ode.rhs(r + c5 * h, add(y, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}, h));
    const auto k6 = ode.rhs(r + h, add(y, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}, h));
    const auto y5 = add(y, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}}, h);
    const auto k7 = ode.rhs(r + h, y5);
    for (int j = 0; j < 2; ++j)
        err[j] = h * (e1 * k1[j] + e3 * k3[j] + e4 * k4[j] + e5 * k5[j] + e6 * k6[j] + e7 * k7[j]);
    return y5;
}

}  // namespace detail

/**
 * Integrates the radial profile ODE in integrated form,
 *   |g'|^{p-2} g' = -β r g^{1/m} - (α - βN) r^{1-N} ∫_0^r s^{N-1} g^{1/m} ds,
 * with state (g, ∫ s^{N-1} g^{1/m}) and g(0) = M^m. The first zero of g is located by
 * bisection on the step length.
 */
inline ProfileCurve integrate_profile(const SelfSimilarSpec& spec, const Parameters& prm, double r_max,
                                      const ProfileControls& ctl = {}) {
    prm.require(Regime::Degenerate, "integrate_profile");
    DNLE_REQUIRE(spec.M > 0.0, InvalidArgument, "height M must be positive");
    DNLE_REQUIRE(spec.alpha >= 0.0 && spec.beta >= 0.0, InvalidArgument, "exponents must be nonnegative");
    DNLE_REQUIRE(std::abs(check_alpha_beta(spec.alpha, spec.beta, prm)) <= 1e-12, InvalidArgument,
                 "(alpha, beta) off the constraint line");
    DNLE_REQUIRE(r_max > 0.0, InvalidArgument, "r_max must be positive");

    const detail::ProfileOde ode{prm, spec.alpha, spec.beta};
    const double n = prm.N;
    const double g0 = std::pow(spec.M, prm.m);
    const double pp = prm.p / (prm.p - 1.0);

    ProfileCurve curve;
    curve.kind = spec.classify(prm);
    curve.m = prm.m;
    curve.r.push_back(0.0);
    curve.g.push_back(g0);
    curve.dg.push_back(0.0);

    // series start: g ≈ M^m - ((p-1)/p)(α M / N)^{1/(p-1)} r^{p'}, I ≈ M r^N / N
    double r = ctl.first_step_fraction * r_max;
    std::array<double, 2> y{g0 - (prm.p - 1.0) / prm.p * std::pow(spec.alpha * spec.M / n, 1.0 / (prm.p - 1.0)) *
                                     std::pow(r, pp),
                            spec.M * std::pow(r, n) / n};
    curve.r.push_back(r);
    curve.g.push_back(y[0]);
    curve.dg.push_back(ode.slope(r, y[0], y[1]));

    const double scale = g0;
    double h = r;
    std::size_t steps = 0;
    while (r < r_max) {
        DNLE_REQUIRE(++steps < ctl.max_steps, IntegrationFailure, "profile integration exceeded its step budget");
        h = std::min(h, r_max - r);
        std::array<double, 2> err{};
        const auto next = detail::dp45_step(ode, r, y, h, err);
        double en = 0.0;
        for (int j = 0; j < 2; ++j) {
            const double sc = ctl.atol * (j == 0 ? scale : std::max(1.0, std::abs(y[1]))) +
                              ctl.rtol * std::max(std::abs(y[j]), std::abs(next[j]));
            en = std::max(en, std::abs(err[j]) / sc);
        }
        if (!std::isfinite(en)) {
            h *= 0.25;
            DNLE_REQUIRE(h > 1e-300, IntegrationFailure, "profile integration step underflow");
            continue;
        }
        if (en > 1.0) {
            h *= std::max(0.1, 0.9 * std::pow(en, -0.2));
            DNLE_REQUIRE(h > 1e-16 * r_max, IntegrationFailure, "profile integration step underflow");
            continue;
        }
        if (next[0] <= 0.0) {
            // bisect on the step length for the first zero of g
            double lo = 0.0, hi = h;
            std::array<double, 2> ylo = y;
            while (hi - lo > ctl.event_tolerance * std::max(1.0, r)) {
                const double mid = 0.5 * (lo + hi);
                std::array<double, 2> e2{};
                const auto ym = detail::dp45_step(ode, r, y, mid, e2);
                if (ym[0] > 0.0) {
                    lo = mid;
                    ylo = ym;
                } else {
                    hi = mid;
                }
            }
            const double a = r + lo;
            if (lo > 0.0) {
                curve.r.push_back(a);
                curve.g.push_back(ylo[0]);
                curve.dg.push_back(ode.slope(a, std::max(ylo[0], 0.0), ylo[1]));
            }
            curve.support_radius = a;
            curve.crossing_slope = ode.slope(a, 0.0, ylo[1]);
            curve.g.back() = 0.0;
            return curve;
        }
        r += h;
        y = next;
        curve.r.push_back(r);
        curve.g.push_back(y[0]);
        curve.dg.push_back(ode.slope(r, y[0], y[1]));
        h *= std::min(5.0, 0.9 * std::pow(std::max(en, 1e-10), -0.2));
    }
    if (ctl.require_crossing) {
        throw NoCrossing("profile stays positive up to r_max = " + fmt(r_max));
    }
    return curve;
}

/// a <= M^{(κ-1)/p} (mp/(κ-1))^{(p-1)/p} β^{-1/p}.
inline double support_radius_bound(double M, const Parameters& prm, double beta) {
    prm.require(Regime::Degenerate, "support_radius_bound");
    DNLE_REQUIRE(beta > 0.0 && M > 0.0, InvalidArgument, "M and beta must be positive");
    return std::pow(M, (prm.kappa - 1.0) / prm.p) *
           std::pow(prm.m * prm.p / (prm.kappa - 1.0), (prm.p - 1.0) / prm.p) * std::pow(beta, -1.0 / prm.p);
}

struct RescaleIdentityReport {
    double profile_residual = 0.0;  // max |h(r;M) - M h(M^{-(κ-1)/p} r; 1)|
    double radius_residual = 0.0;   // |a(M) - M^{(κ-1)/p} a(1)| when both radii exist
};

/// Compares h(·;M) with the rescaled h(·;1) at the given radii (two independent integrations).
inline RescaleIdentityReport rescale_profile_identity(double M, std::span<const double> radii, double beta,
                                                      const Parameters& prm, const ProfileControls& ctl = {}) {
    prm.require(Regime::Degenerate, "rescale_profile_identity");
    const double lam = std::pow(M, (prm.kappa - 1.0) / prm.p);
    const double r_top = radii.empty() ? 1.0 : *std::max_element(radii.begin(), radii.end());
    double r_max = r_top;
    if (beta > 0.0) r_max = std::max(r_max, 1.05 * support_radius_bound(std::max(M, 1.0), prm, beta));
    const auto spec_m = SelfSimilarSpec::from_beta(beta, prm, M);
    const auto spec_1 = SelfSimilarSpec::from_beta(beta, prm, 1.0);
    const auto cm = integrate_profile(spec_m, prm, r_max, ctl);
    const auto c1 = integrate_profile(spec_1, prm, std::max(r_max, r_max / lam), ctl);
    RescaleIdentityReport rep;
    for (double x : radii) rep.profile_residual = std::max(rep.profile_residual, std::abs(cm.h_at(x) - M * c1.h_at(x / lam)));
    if (cm.support_radius && c1.support_radius)
        rep.radius_residual = std::abs(*cm.support_radius - lam * *c1.support_radius);
    return rep;
}

struct DecayClassification {
    double gamma = 0.0;   // αm/β
    double coefficient = 0.0;  // γ(p-1) + p - N
    int sign = 0;
    double gamma1 = 0.0;  // (N-p)/(p-1)
    double beta1 = 0.0;   // κ β_B
    double alpha1 = 0.0;  // (1 - p β₁)/(κ-1)
};

/// Leading decay exponent and the sign of γ(p-1)+p-N for α < βN.
inline DecayClassification classify_decay(double alpha, double beta, const Parameters& prm, double tol = 1e-12) {
    prm.require(Regime::Degenerate, "classify_decay");
    DNLE_REQUIRE(beta > 0.0, InvalidArgument, "beta must be positive");
    DNLE_REQUIRE(alpha < beta * prm.N, InvalidArgument, "decay classification requires alpha < beta N");
    const auto bc = barenblatt_constants(prm);
    DecayClassification d;
    d.gamma = alpha * prm.m / beta;
    d.coefficient = d.gamma * (prm.p - 1.0) + prm.p - prm.N;
    d.sign = std::abs(d.coefficient) <= tol ? 0 : (d.coefficient > 0.0 ? 1 : -1);
    d.gamma1 = (prm.N - prm.p) / (prm.p - 1.0);
    d.beta1 = prm.kappa * bc.beta;
    d.alpha1 = (1.0 - prm.p * d.beta1) / (prm.kappa - 1.0);
    return d;
}

}  // namespace dnle
