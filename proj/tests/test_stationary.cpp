#include <gtest/gtest.h>

#include <numbers>

#include "dnle/stationary.hpp"

using namespace dnle;

namespace {

double rel_max_diff(const Field& a, const Field& b) {
    double d = 0, s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::abs(a[i] - b[i]));
        s = std::max(s, std::abs(b[i]));
    }
    return d / s;
}

const StationaryProfile& pme_profile() {
    static const auto prof = compute_profile_f(Parameters::make(2, 2), Domain::interval(1.0, 257), ProfileMethod::MinimizeJ);
    return prof;
}

}  // namespace

TEST(FunctionalJ, ZeroIsZero) {
    const auto d = Domain::interval(1.0, 33);
    EXPECT_EQ(functional_J(Field(33, 0.0), Parameters::make(2, 2), d), 0.0);
}

TEST(FunctionalJ, NegativeAtProfile) {
    const auto d = Domain::interval(1.0, 257);
    EXPECT_LT(functional_J(pme_profile().w, Parameters::make(2, 2), d), 0.0);
}

TEST(FunctionalJ, QuadraticIncreaseUnderPerturbation) {
    const auto prm = Parameters::make(2, 2);
    const auto d = Domain::interval(1.0, 257);
    const auto& w = pme_profile().w;
    const auto pert = d.sample([](double x) { return std::max(0.0, 1.0 - std::pow((x - 0.4) / 0.2, 2)); });
    const double j0 = functional_J(w, prm, d);
    std::vector<double> inc;
    for (double delta : {1e-2, 5e-3}) {
        Field wp(w);
        for (std::size_t i = 0; i < w.size(); ++i) wp[i] += delta * pert[i];
        inc.push_back(functional_J(wp, prm, d) - j0);
        EXPECT_GT(inc.back(), 0.0);
    }
    EXPECT_NEAR(inc[0] / inc[1], 4.0, 0.3);
}

TEST(FunctionalJ, RejectsNonDegenerate) {
    const auto d = Domain::interval(1.0, 33);
    EXPECT_THROW(functional_J(Field(33, 0.0), Parameters::make(1, 2), d), RegimeError);
}

TEST(Profile, MethodsAgree) {
    const auto prm = Parameters::make(2, 2);
    const auto d = Domain::interval(1.0, 257);
    const auto a = pme_profile();
    const auto b = compute_profile_f(prm, d, ProfileMethod::LongTimeLimit);
    EXPECT_EQ(a.method, ProfileMethod::MinimizeJ);
    EXPECT_EQ(b.method, ProfileMethod::LongTimeLimit);
    EXPECT_LE(rel_max_diff(b.f, a.f), 5e-3);
}

TEST(Profile, ResidualCertifiedAndPositive) {
    const auto d = Domain::interval(1.0, 257);
    const auto& prof = pme_profile();
    EXPECT_LE(prof.residual_norm, 1e-8);
    for (std::size_t i : d.interior()) EXPECT_GT(prof.f[i], 0.0);
    for (std::size_t i = 0; i < prof.f.size(); ++i) EXPECT_NEAR(prof.w[i], prof.f[i] * prof.f[i], 1e-14);
}

TEST(Profile, BoundaryEnvelope) {
    const auto& prof = pme_profile();
    EXPECT_GT(prof.C1, 0.0);
    EXPECT_LE(prof.C1, prof.C2);
    EXPECT_LE(prof.C2 / prof.C1, 3.0);
}

TEST(Profile, GridRefinementChangeIsFirstOrder) {
    const auto prm = Parameters::make(2, 2);
    const auto coarse = compute_profile_f(prm, Domain::interval(1.0, 65), ProfileMethod::MinimizeJ);
    const auto fine = compute_profile_f(prm, Domain::interval(1.0, 129), ProfileMethod::MinimizeJ);
    double diff = 0;
    for (std::size_t i = 0; i < coarse.f.size(); ++i) diff = std::max(diff, std::abs(coarse.f[i] - fine.f[2 * i]));
    EXPECT_LE(diff, 1.0 / 64 * sup_norm(fine.f));
}

TEST(Profile, OtherDegenerateParameters) {
    for (auto [m, p, n] : {std::tuple{1.0, 3.0, 1}, {3.0, 1.5, 1}, {2.0, 2.0, 3}}) {
        const auto prm = Parameters::make(m, p, n);
        const auto d = n == 1 ? Domain::interval(1.0, 129) : Domain::ball(1.0, n, 129);
        const auto prof = compute_profile_f(prm, d, ProfileMethod::MinimizeJ);
        EXPECT_LE(prof.residual_norm, 1e-8);
        EXPECT_GT(prof.C1, 0.0);
    }
}

TEST(Profile, RejectsNonDegenerate) {
    const auto d = Domain::interval(1.0, 33);
    EXPECT_THROW(compute_profile_f(Parameters::make(1, 2), d, ProfileMethod::MinimizeJ), RegimeError);
    EXPECT_THROW(compute_profile_f(Parameters::make(2, 2), d, ProfileMethod::MinimizeJ, -1.0), InvalidArgument);
}

TEST(Profile, MethodNames) {
    EXPECT_STREQ(to_string(ProfileMethod::MinimizeJ), "minimize_J");
    EXPECT_STREQ(to_string(ProfileMethod::LongTimeLimit), "long_time_limit");
}

TEST(Rayleigh, SineGivesPiSquared) {
    const auto d = Domain::interval(1.0, 513);
    const auto phi = d.sample([](double x) { return std::sin(std::numbers::pi * x); });
    EXPECT_NEAR(rayleigh_quotient(phi, 2, d), std::numbers::pi * std::numbers::pi, 1e-3 * std::numbers::pi * std::numbers::pi);
}

TEST(Rayleigh, ParabolaGivesTen) {
    const auto d = Domain::interval(1.0, 513);
    const auto phi = d.sample([](double x) { return x * (1 - x); });
    EXPECT_NEAR(rayleigh_quotient(phi, 2, d), 10.0, 1e-3);
}

TEST(Rayleigh, ScaleInvariant) {
    const auto d = Domain::interval(1.0, 65);
    const auto phi = d.sample([](double x) { return x * (1 - x) * (1 + x); });
    for (double p : {1.5, 2.0, 3.0}) {
        Field scaled(phi);
        for (double& x : scaled) x *= -3.5;
        EXPECT_NEAR(rayleigh_quotient(scaled, p, d), rayleigh_quotient(phi, p, d), 1e-12 * rayleigh_quotient(phi, p, d));
    }
}

TEST(Rayleigh, RejectsZero) {
    const auto d = Domain::interval(1.0, 33);
    EXPECT_THROW(rayleigh_quotient(Field(33, 0.0), 2, d), InvalidArgument);
}

TEST(Eigen, HeatEigenvalue) {
    const auto d = Domain::interval(1.0, 257);
    const auto e = compute_first_eigenpair(2, d);
    EXPECT_NEAR(e.lambda1, std::numbers::pi * std::numbers::pi, 5e-3 * std::numbers::pi * std::numbers::pi);
}

TEST(Eigen, PLaplacianEigenvalue) {
    const double p = 3;
    const double pi_p = 2 * std::numbers::pi / (p * std::sin(std::numbers::pi / p));
    const double exact = (p - 1) * std::pow(pi_p, p);
    const auto e = compute_first_eigenpair(p, Domain::interval(1.0, 257));
    EXPECT_NEAR(e.lambda1, exact, 1e-2 * exact);
}

TEST(Eigen, NormalizedPositiveAndResidualCertified) {
    const auto d = Domain::interval(1.0, 129);
    for (double p : {1.5, 2.0, 3.0, 4.0}) {
        const auto e = compute_first_eigenpair(p, d);
        EXPECT_DOUBLE_EQ(sup_norm(e.V), 1.0);
        for (std::size_t i : d.interior()) EXPECT_GT(e.V[i], 0.0);
        EXPECT_LE(e.residual_norm, 1e-8);
        const auto r = detail::eigen_residual(d, p, e.lambda1, e.V, FluxRegularization::defaults_for(p));
        double worst = 0;
        for (std::size_t i : d.interior()) worst = std::max(worst, std::abs(r[i]));
        EXPECT_LE(worst, 1e-8) << "p = " << p;
    }
}

TEST(Eigen, BallHeatEigenvalue) {
    // first Dirichlet eigenvalue of the unit 3-ball is π²
    const auto e = compute_first_eigenpair(2, Domain::ball(1.0, 3, 257));
    EXPECT_NEAR(e.lambda1, std::numbers::pi * std::numbers::pi, 1e-2 * std::numbers::pi * std::numbers::pi);
}

TEST(Eigen, InvariantToGuessScale) {
    const auto d = Domain::interval(1.0, 129);
    const auto guess = d.sample([](double x) { return x * (1 - x); });
    Field big(guess);
    for (double& x : big) x *= 1e3;
    const auto a = compute_first_eigenpair(3, d, 1e-8, &guess);
    const auto b = compute_first_eigenpair(3, d, 1e-8, &big);
    EXPECT_NEAR(a.lambda1, b.lambda1, 1e-8 * a.lambda1);
}

TEST(Eigen, GridConvergence) {
    std::vector<double> lam;
    for (std::size_t n : {33, 65, 129}) lam.push_back(compute_first_eigenpair(3, Domain::interval(1.0, n)).lambda1);
    EXPECT_GE(std::abs(lam[0] - lam[1]) / std::abs(lam[1] - lam[2]), 1.5);
}

TEST(Eigen, RejectsBadExponent) {
    EXPECT_THROW(compute_first_eigenpair(1.0, Domain::interval(1.0, 33)), InvalidArgument);
}

TEST(BoundaryGrowth, ExactPowerOfDistance) {
    const auto d = Domain::interval(1.0, 65);
    for (double m : {1.0, 2.0}) {
        const auto f = d.sample([&](double x) { return std::pow(std::min(x, 1 - x), 1 / m); });
        auto [c1, c2] = boundary_growth_check(f, d, m);
        EXPECT_NEAR(c1, 1.0, 1e-12);
        EXPECT_NEAR(c2, 1.0, 1e-12);
        Field twice(f);
        for (double& x : twice) x *= 2;
        std::tie(c1, c2) = boundary_growth_check(twice, d, m);
        EXPECT_NEAR(c1, 2.0, 1e-12);
        EXPECT_NEAR(c2, 2.0, 1e-12);
    }
}

TEST(BoundaryGrowth, RejectsNonpositiveInterior) {
    const auto d = Domain::interval(1.0, 17);
    EXPECT_THROW(boundary_growth_check(Field(17, 0.0), d, 2), InvalidArgument);
}

TEST(BoundaryPrinciple, Examples) {
    const auto d = Domain::interval(1.0, 1025);
    const auto w = d.sample([](double x) { return x * (1 - x); });
    EXPECT_NEAR(boundary_principle_check(w, d), 1.0, 1e-3);
    EXPECT_EQ(boundary_principle_check(Field(1025, 0.0), d), 0.0);
    EXPECT_GT(boundary_principle_check(pme_profile().w, Domain::interval(1.0, 257)), 0.0);
}

TEST(UniquenessProbe, DistinctGuessesAgree) {
    const auto prm = Parameters::make(2, 2);
    const auto d = Domain::interval(1.0, 129);
    std::vector<Field> guesses{
        d.sample([](double x) { return x * (1 - x); }),
        d.sample([](double x) { return 10 * std::sin(std::numbers::pi * x); }),
        d.sample([](double x) { return 1e-3 * x * x * (1 - x); }),
        d.sample([](double x) { return std::max(0.0, 0.1 - std::abs(x - 0.8)); }),
        d.sample([](double x) { return std::min(x, 1 - x) + 0.3 * std::sin(3 * std::numbers::pi * x) * x * (1 - x); }),
    };
    const auto ref = compute_profile_f(prm, d, ProfileMethod::MinimizeJ);
    for (const auto& g : guesses) {
        const auto prof = compute_profile_f(prm, d, ProfileMethod::MinimizeJ, 1e-8, &g);
        EXPECT_LE(rel_max_diff(prof.f, ref.f), 1e-2);
    }
}
