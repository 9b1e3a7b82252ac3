#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dnle/errors.hpp"

namespace dnle {

/// Tridiagonal matrix stored by diagonals: row i is lower[i] x_{i-1} + diag[i] x_i + upper[i] x_{i+1}.
struct Tridiagonal {
    std::vector<double> lower;
    std::vector<double> diag;
    std::vector<double> upper;

    explicit Tridiagonal(std::size_t n = 0) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}

    std::size_t size() const { return diag.size(); }

    void set_identity_row(std::size_t i) {
        lower[i] = 0.0;
        upper[i] = 0.0;
        diag[i] = 1.0;
    }

    std::vector<double> apply(std::span<const double> x) const {
        const std::size_t n = size();
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = diag[i] * x[i];
            if (i > 0) s += lower[i] * x[i - 1];
            if (i + 1 < n) s += upper[i] * x[i + 1];
            y[i] = s;
        }
        return y;
    }
};

/// Thomas algorithm. Throws NonConvergence on a (numerically) zero pivot.
inline std::vector<double> solve(const Tridiagonal& a, std::span<const double> rhs) {
    const std::size_t n = a.size();
    DNLE_REQUIRE(rhs.size() == n, InvalidArgument, "tridiagonal system size mismatch");
    std::vector<double> c(n), d(n), x(n);
    double pivot = a.diag[0];
    DNLE_REQUIRE(std::abs(pivot) > 1e-300 && std::isfinite(pivot), NonConvergence,
                 "singular tridiagonal pivot");
    c[0] = n > 1 ? a.upper[0] / pivot : 0.0;
    d[0] = rhs[0] / pivot;
    for (std::size_t i = 1; i < n; ++i) {
        pivot = a.diag[i] - a.lower[i] * c[i - 1];
        DNLE_REQUIRE(std::abs(pivot) > 1e-300 && std::isfinite(pivot), NonConvergence,
                     "singular tridiagonal pivot");
        c[i] = i + 1 < n ? a.upper[i] / pivot : 0.0;
        d[i] = (rhs[i] - a.lower[i] * d[i - 1]) / pivot;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
    return x;
}

/// Solves (T + col e_k^T - T e_k e_k^T) x = rhs, i.e. T with column k replaced by `col`.
/// Sherman-Morrison on top of two tridiagonal solves.
inline std::vector<double> solve_column_replaced(const Tridiagonal& t, std::size_t k,
                                                 std::span<const double> col,
                                                 std::span<const double> rhs) {
    const std::size_t n = t.size();
    std::vector<double> delta(col.begin(), col.end());
    // delta = col - T e_k
    delta[k] -= t.diag[k];
    if (k > 0) delta[k - 1] -= t.upper[k - 1];
    if (k + 1 < n) delta[k + 1] -= t.lower[k + 1];
    const auto y = solve(t, rhs);
    const auto z = solve(t, delta);
    const double denom = 1.0 + z[k];
    DNLE_REQUIRE(std::abs(denom) > 1e-14, NonConvergence, "bordered system is singular");
    std::vector<double> x(n);
    const double scale = y[k] / denom;
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] - scale * z[i];
    return x;
}

}  // namespace dnle
