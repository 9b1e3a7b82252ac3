#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "dnle/errors.hpp"
#include "dnle/grid.hpp"
#include "dnle/tridiagonal.hpp"

namespace dnle {

/// Floor on the gradient magnitude inside |∇w|^{p-2}. Zero is only allowed for p >= 2.
struct FluxRegularization {
    double epsilon = 0.0;

    static FluxRegularization defaults_for(double p) {
        return FluxRegularization{p < 2.0 ? 1e-10 : 0.0};
    }

    void validate(double p) const {
        DNLE_REQUIRE(epsilon >= 0.0 && std::isfinite(epsilon), InvalidArgument,
                     "flux regularization must be nonnegative");
        DNLE_REQUIRE(epsilon > 0.0 || p >= 2.0, InvalidArgument,
                     "flux regularization must be positive when p < 2");
    }
};

/// x^e for x >= 0; negative round-off is clamped to zero before powering.
inline double clamped_pow(double x, double e) {
    if (!(x > 0.0)) return 0.0;
    if (e == 1.0) return x;
    if (e == 2.0) return x * x;
    if (e == 0.5) return std::sqrt(x);
    return std::pow(x, e);
}

/// Derivative of clamped_pow with respect to x.
inline double clamped_pow_derivative(double x, double e) {
    if (e == 1.0) return 1.0;
    if (!(x > 0.0)) return e > 1.0 ? 0.0 : std::numeric_limits<double>::infinity();
    if (e == 2.0) return 2.0 * x;
    if (e == 0.5) return 0.5 / std::sqrt(x);
    return e * std::pow(x, e - 1.0);
}

/// (g^2 + eps^2)^{(p-2)/2} g, which is |g|^{p-2} g when eps = 0.
inline double p_flux(double g, double p, FluxRegularization reg = {}) {
    if (p == 2.0) return g;
    const double eps = reg.epsilon;
    if (eps == 0.0) {
        if (g == 0.0) return 0.0;
        if (p == 3.0) return std::abs(g) * g;
        return std::pow(std::abs(g), p - 2.0) * g;
    }
    return std::pow(g * g + eps * eps, 0.5 * (p - 2.0)) * g;
}

/// d p_flux / dg.
inline double p_flux_derivative(double g, double p, FluxRegularization reg = {}) {
    if (p == 2.0) return 1.0;
    const double eps = reg.epsilon;
    if (eps == 0.0) {
        if (g == 0.0) return p > 2.0 ? 0.0 : std::numeric_limits<double>::infinity();
        if (p == 3.0) return 2.0 * std::abs(g);
        return (p - 1.0) * std::pow(std::abs(g), p - 2.0);
    }
    const double s = g * g + eps * eps;
    return std::pow(s, 0.5 * (p - 4.0)) * ((p - 1.0) * g * g + eps * eps);
}

/// Fluxes |w'|^{p-2} w' at the half nodes.
inline std::vector<double> face_fluxes(const Domain& domain, std::span<const double> w, double p,
                                       FluxRegularization reg = {}) {
    auto g = domain.gradient(w);
    for (double& v : g) v = p_flux(v, p, reg);
    return g;
}

/**
 * Conservative discretization of Δ_p w = r^{1-N} (r^{N-1} |w'|^{p-2} w')'.
 *
 * Fluxes live on half nodes; the divergence uses finite-volume weights so that the
 * origin of a ball gets the zero-flux symmetric stencil. Dirichlet rows are zero.
 */
inline Field discrete_p_laplacian(const Domain& domain, std::span<const double> w, double p,
                                  FluxRegularization reg = {}) {
    DNLE_REQUIRE(p > 1.0, InvalidArgument, "p must exceed 1");
    domain.check_field(w, "w");
    const auto flux = face_fluxes(domain, w, p, reg);
    const auto area = domain.face_areas();
    const auto vol = domain.cell_volumes();
    const std::size_t n = w.size();
    Field out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (domain.is_dirichlet(i)) continue;
        const double right = i + 1 < n ? area[i] * flux[i] : 0.0;
        const double left = i > 0 ? area[i - 1] * flux[i - 1] : 0.0;
        out[i] = (right - left) / vol[i];
    }
    return out;
}

/// Jacobian of discrete_p_laplacian with respect to w. Dirichlet rows are left zero.
inline Tridiagonal p_laplacian_jacobian(const Domain& domain, std::span<const double> w, double p,
                                        FluxRegularization reg = {}) {
    const std::size_t n = w.size();
    const auto g = domain.gradient(w);
    const auto area = domain.face_areas();
    const auto vol = domain.cell_volumes();
    const double h = domain.spacing();
    Tridiagonal jac(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (domain.is_dirichlet(i)) continue;
        const double kr = i + 1 < n ? area[i] * p_flux_derivative(g[i], p, reg) / h : 0.0;
        const double kl = i > 0 ? area[i - 1] * p_flux_derivative(g[i - 1], p, reg) / h : 0.0;
        if (i + 1 < n) jac.upper[i] = kr / vol[i];
        if (i > 0) jac.lower[i] = kl / vol[i];
        jac.diag[i] = -(kr + kl) / vol[i];
    }
    return jac;
}

/// γ₁ = 2^{2-p}, the constant used in the strong monotonicity inequality for p >= 2.
inline double strong_monotonicity_gamma1(double p) { return std::pow(2.0, 2.0 - p); }

/// γ₂ = min{1, 2(p-1)}, the constant for 1 < p < 2.
inline double strong_monotonicity_gamma2(double p) { return std::min(1.0, 2.0 * (p - 1.0)); }

/// ⟨|a|^{p-2}a - |b|^{p-2}b, a - b⟩, the weak monotonicity quantity.
inline double monotonicity_pairing(std::span<const double> a, std::span<const double> b, double p) {
    DNLE_REQUIRE(a.size() == b.size(), InvalidArgument, "vector dimension mismatch");
    DNLE_REQUIRE(p > 1.0, InvalidArgument, "p must exceed 1");
    double na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    const double sa = na > 0.0 ? std::pow(na, p - 2.0) : 0.0;
    const double sb = nb > 0.0 ? std::pow(nb, p - 2.0) : 0.0;
    double pairing = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) pairing += (sa * a[i] - sb * b[i]) * (a[i] - b[i]);
    return pairing;
}

/**
 * Left side minus right side of the strong monotonicity inequality:
 *   p >= 2:     ⟨...⟩ - γ₁ |a-b|^p
 *   1 < p < 2:  ⟨...⟩ - γ₂ |a-b|^2 / (|a|^{2-p} + |b|^{2-p})
 * Nonnegative for every pair.
 */
inline double monotonicity_gap(std::span<const double> a, std::span<const double> b, double p) {
    const double lhs = monotonicity_pairing(a, b, p);
    double na = 0.0, nb = 0.0, nd = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        na += a[i] * a[i];
        nb += b[i] * b[i];
        nd += (a[i] - b[i]) * (a[i] - b[i]);
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    nd = std::sqrt(nd);
    if (p >= 2.0) return lhs - strong_monotonicity_gamma1(p) * std::pow(nd, p);
    const double denom = std::pow(na, 2.0 - p) + std::pow(nb, 2.0 - p);
    if (denom == 0.0) return lhs;
    return lhs - strong_monotonicity_gamma2(p) * nd * nd / denom;
}

}  // namespace dnle
