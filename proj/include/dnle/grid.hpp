#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "dnle/errors.hpp"

namespace dnle {

/// Nodal values on a Domain. One entry per node, boundary nodes included.
using Field = std::vector<double>;

enum class Regime { Degenerate, Quasilinear, Fast };

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::Degenerate: return "degenerate";
        case Regime::Quasilinear: return "quasilinear";
        case Regime::Fast: return "fast";
    }
    return "unknown";
}

inline constexpr double kQuasilinearTolerance = 1e-12;

/// Classifies kappa = m(p-1) against 1.
inline Regime classify_regime(double m, double p) {
    DNLE_REQUIRE(m > 0.0 && std::isfinite(m), InvalidArgument, "exponent m must be positive");
    DNLE_REQUIRE(p > 1.0 && std::isfinite(p), InvalidArgument, "exponent p must exceed 1");
    const double kappa = m * (p - 1.0);
    if (std::abs(kappa - 1.0) <= kQuasilinearTolerance) return Regime::Quasilinear;
    return kappa > 1.0 ? Regime::Degenerate : Regime::Fast;
}

/// Exponents of u_t = Δ_p u^m together with the derived quantities every formula uses.
struct Parameters {
    double m = 2.0;
    double p = 2.0;
    int N = 1;
    double kappa = 2.0;  // m(p-1)
    double mu = 1.0;     // 1/(kappa-1); NaN outside the degenerate regime
    Regime regime = Regime::Degenerate;

    static Parameters make(double m, double p, int N = 1) {
        DNLE_REQUIRE(N >= 1, InvalidArgument, "dimension N must be a positive integer");
        Parameters prm;
        prm.regime = classify_regime(m, p);
        prm.m = m;
        prm.p = p;
        prm.N = N;
        prm.kappa = m * (p - 1.0);
        prm.mu = prm.regime == Regime::Degenerate ? 1.0 / (prm.kappa - 1.0)
                                                   : std::numeric_limits<double>::quiet_NaN();
        return prm;
    }

    void require(Regime wanted, const char* what) const {
        if (regime != wanted) {
            throw RegimeError(std::string(what) + " requires the " + to_string(wanted) +
                              " regime, got " + to_string(regime));
        }
    }
};

enum class Geometry { Interval, Ball };

inline constexpr std::size_t kMinNodes = 8;

/**
 * Uniform 1D discretization of an interval (0, L) or of the radial variable of a ball
 * B_R in R^N.
 *
 * Interval: both endpoints carry Dirichlet conditions. Ball: node 0 is the centre
 * (symmetry, zero flux) and the last node sits on the sphere r = R (Dirichlet).
 *
 * Finite-volume weights make the discrete divergence and the quadrature consistent:
 * summing `cell_volume[i] * div_i * phi_i` reproduces minus the face sum of
 * `face_area * flux * dphi` exactly when phi vanishes on Dirichlet nodes.
 */
class Domain {
public:
    static Domain interval(double length, std::size_t nodes) {
        DNLE_REQUIRE(length > 0.0 && std::isfinite(length), InvalidArgument,
                     "interval length must be positive");
        check_resolution(nodes);
        Domain d(Geometry::Interval, length, 1, nodes);
        d.dirichlet_.front() = true;
        d.dirichlet_.back() = true;
        std::fill(d.face_area_.begin(), d.face_area_.end(), 1.0);
        std::fill(d.cell_volume_.begin(), d.cell_volume_.end(), d.h_);
        d.cell_volume_.front() = d.cell_volume_.back() = 0.5 * d.h_;
        d.sphere_measure_ = 1.0;
        return d;
    }

    static Domain ball(double radius, int dimension, std::size_t nodes) {
        DNLE_REQUIRE(radius > 0.0 && std::isfinite(radius), InvalidArgument,
                     "ball radius must be positive");
        DNLE_REQUIRE(dimension >= 1, InvalidArgument, "ball dimension must be >= 1");
        check_resolution(nodes);
        Domain d(Geometry::Ball, radius, dimension, nodes);
        d.dirichlet_.back() = true;
        const double n = dimension;
        for (std::size_t i = 0; i + 1 < nodes; ++i) {
            const double r_face = 0.5 * (d.nodes_[i] + d.nodes_[i + 1]);
            d.face_area_[i] = std::pow(r_face, n - 1.0);
        }
        for (std::size_t i = 0; i < nodes; ++i) {
            const double lo = i == 0 ? 0.0 : 0.5 * (d.nodes_[i - 1] + d.nodes_[i]);
            const double hi = i + 1 == nodes ? d.nodes_[i] : 0.5 * (d.nodes_[i] + d.nodes_[i + 1]);
            d.cell_volume_[i] = (std::pow(hi, n) - std::pow(lo, n)) / n;
        }
        // |S^{N-1}|; equals 2 for N = 1 so the radial line integrates over (-R, R)
        d.sphere_measure_ = 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
        return d;
    }

    Geometry geometry() const { return geometry_; }
    double size() const { return size_; }
    int dimension() const { return dimension_; }
    std::size_t size_nodes() const { return nodes_.size(); }
    double spacing() const { return h_; }

    std::span<const double> nodes() const { return nodes_; }
    double node(std::size_t i) const { return nodes_[i]; }
    bool is_dirichlet(std::size_t i) const { return dirichlet_[i]; }
    bool is_interior(std::size_t i) const { return !dirichlet_[i]; }

    /// r^{N-1} at the half node between i and i+1 (1 on intervals).
    std::span<const double> face_areas() const { return face_area_; }
    /// Finite-volume measure of the control volume around each node (without |S^{N-1}|).
    std::span<const double> cell_volumes() const { return cell_volume_; }
    double sphere_measure() const { return sphere_measure_; }

    /// Regularity radius of the distance function: L/2 for intervals, R for balls.
    double regularity_radius() const { return geometry_ == Geometry::Interval ? 0.5 * size_ : size_; }

    /// Interior node indices (every node that is not a Dirichlet node).
    std::vector<std::size_t> interior() const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (!dirichlet_[i]) idx.push_back(i);
        return idx;
    }

    void check_field(std::span<const double> f, const char* what = "field") const {
        if (f.size() != nodes_.size()) {
            throw InvalidArgument(std::string(what) + " has " + std::to_string(f.size()) +
                                  " values but the domain has " + std::to_string(nodes_.size()) +
                                  " nodes");
        }
    }

    /// ∫ f over the domain (physical measure, including |S^{N-1}| for balls).
    double integrate(std::span<const double> f) const {
        check_field(f);
        double s = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) s += cell_volume_[i] * f[i];
        return sphere_measure_ * s;
    }

    /// ∫ of a quantity sampled at the half nodes (one value per cell).
    double integrate_faces(std::span<const double> g) const {
        DNLE_REQUIRE(g.size() + 1 == nodes_.size(), InvalidArgument, "face field has wrong length");
        double s = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) s += face_area_[i] * h_ * g[i];
        return sphere_measure_ * s;
    }

    /// Difference quotients (w_{i+1} - w_i)/h at the half nodes.
    std::vector<double> gradient(std::span<const double> w) const {
        check_field(w);
        std::vector<double> g(nodes_.size() - 1);
        for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) g[i] = (w[i + 1] - w[i]) / h_;
        return g;
    }

    /// Copy of `f` with Dirichlet nodes set to zero.
    Field zero_boundary(Field f) const {
        check_field(f);
        for (std::size_t i = 0; i < f.size(); ++i)
            if (dirichlet_[i]) f[i] = 0.0;
        return f;
    }

    template <class Fn>
    Field sample(Fn&& fn) const {
        Field f(nodes_.size());
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = dirichlet_[i] ? 0.0 : fn(nodes_[i]);
        return f;
    }

private:
    Domain(Geometry g, double size, int dimension, std::size_t n)
        : geometry_(g), size_(size), dimension_(dimension), h_(size / double(n - 1)),
          nodes_(n), dirichlet_(n, false), face_area_(n - 1), cell_volume_(n) {
        for (std::size_t i = 0; i < n; ++i) nodes_[i] = size * double(i) / double(n - 1);
        nodes_.back() = size;
    }

    static void check_resolution(std::size_t nodes) {
        if (nodes < kMinNodes) {
            throw InvalidArgument("resolution below minimum: " + std::to_string(nodes) +
                                  " nodes, at least " + std::to_string(kMinNodes) + " required");
        }
    }

    Geometry geometry_;
    double size_;
    int dimension_;
    double h_;
    std::vector<double> nodes_;
    std::vector<bool> dirichlet_;
    std::vector<double> face_area_;
    std::vector<double> cell_volume_;
    double sphere_measure_ = 1.0;
};

/// Distance from a position (x for intervals, r for balls) to the boundary.
inline double distance_to_boundary(const Domain& domain, double x) {
    const double L = domain.size();
    const double slack = 1e-14 * L;
    if (!(x >= -slack && x <= L + slack)) {
        throw InvalidArgument("position " + std::to_string(x) + " lies outside the domain");
    }
    x = std::clamp(x, 0.0, L);
    if (domain.geometry() == Geometry::Interval) return std::min(x, L - x);
    return L - x;
}

/// Distance to the boundary at every node.
inline Field distance_field(const Domain& domain) {
    Field d(domain.size_nodes());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = distance_to_boundary(domain, domain.node(i));
    for (std::size_t i = 0; i < d.size(); ++i)
        if (domain.is_dirichlet(i)) d[i] = 0.0;
    return d;
}

inline bool all_finite(std::span<const double> f) {
    return std::all_of(f.begin(), f.end(), [](double v) { return std::isfinite(v); });
}

inline double sup_norm(std::span<const double> f) {
    double s = 0.0;
    for (double v : f) s = std::max(s, std::abs(v));
    return s;
}

}  // namespace dnle
