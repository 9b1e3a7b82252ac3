#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "dnle/asymptotics.hpp"

using namespace dnle;

namespace {

Field bump(const Domain& d, double centre, double width, double height = 1.0) {
    return d.sample([&](double x) { return height * std::max(0.0, 1.0 - std::pow((x - centre) / width, 2)); });
}

Trajectory separate_variables(const Field& f, const Parameters& prm, double s, const std::vector<double>& times) {
    Trajectory traj;
    for (double t : times) {
        Field u(f);
        for (double& x : u) x *= std::pow(s + t, -prm.mu);
        traj.states.push_back({t, u});
    }
    return traj;
}

RescaledTrajectory constant_multiples(const Field& S, const std::vector<double>& c) {
    RescaledTrajectory r;
    for (std::size_t k = 0; k < c.size(); ++k) {
        Field v(S);
        for (double& x : v) x *= c[k];
        r.time.push_back(double(k));
        r.v.push_back(v);
    }
    return r;
}

SolverControls fixed_dt(double p, double dt) {
    auto c = SolverControls::defaults_for(p);
    c.dt = dt;
    c.dt_max = dt;
    return c;
}

struct Fixture {
    Parameters prm = Parameters::make(2, 2);
    Domain dom = Domain::interval(1.0, 129);
    Field f = compute_profile_f(prm, dom, ProfileMethod::MinimizeJ).f;
};

const Fixture& pme() {
    static const Fixture fx;
    return fx;
}

const Eigenpair& heat_eig() {
    static const auto e = compute_first_eigenpair(2, Domain::interval(1.0, 129));
    return e;
}

const Eigenpair& p3_eig() {
    static const auto e = compute_first_eigenpair(3, Domain::interval(1.0, 129));
    return e;
}

}  // namespace

TEST(FitLine, ExactLine) {
    const std::vector<double> x{0, 1, 2, 3}, y{1, -1, -3, -5};
    const auto fit = fit_line(x, y);
    EXPECT_NEAR(fit.slope, -2.0, 1e-15);
    EXPECT_NEAR(fit.intercept, 1.0, 1e-15);
    EXPECT_EQ(fit.points, 4u);
    EXPECT_TRUE(std::isnan(fit_line(std::vector<double>{1.0}, std::vector<double>{2.0}).slope));
    EXPECT_THROW(fit_line(x, std::vector<double>{1.0}), InvalidArgument);
}

TEST(Rate, SeparateVariablesClosedForm) {
    const auto& fx = pme();
    const auto traj = separate_variables(fx.f, fx.prm, 1.0, geometric_times(1.0, 1e4, 81));
    const auto rep = rate_report_degenerate(traj, fx.f, fx.prm, fx.dom);
    for (std::size_t k = 0; k < rep.t.size(); ++k) {
        const double exact = std::abs(std::pow(rep.t[k] / (1 + rep.t[k]), fx.prm.mu) - 1);
        EXPECT_NEAR(rep.weighted_error[k], exact, 1e-12);
        EXPECT_GE(rep.error[k], 0.0);
    }
    EXPECT_NEAR(rep.fit_t_min, 100.0, 1e-9);
    EXPECT_NEAR(rep.fit.slope, -1.0, 1e-2);
    EXPECT_NEAR(rep.C_num, fx.prm.mu, 0.02 * fx.prm.mu);
    EXPECT_FALSE(rep.trivial);
}

TEST(Rate, ConstantScalesWithOffset) {
    const auto& fx = pme();
    for (double s : {0.5, 2.0, 4.0}) {
        const auto traj = separate_variables(fx.f, fx.prm, s, geometric_times(1.0, 1e5, 81));
        EXPECT_NEAR(rate_report_degenerate(traj, fx.f, fx.prm, fx.dom).C_num, fx.prm.mu * s, 0.02 * fx.prm.mu * s);
    }
}

TEST(Rate, TrivialSolutionFlagged) {
    const auto& fx = pme();
    Trajectory traj;
    for (double t : {1.0, 2.0, 4.0}) traj.states.push_back({t, Field(fx.f.size(), 0.0)});
    const auto rep = rate_report_degenerate(traj, fx.f, fx.prm, fx.dom);
    EXPECT_TRUE(rep.trivial);
    for (double e : rep.error) EXPECT_DOUBLE_EQ(e, sup_norm(fx.f));
    for (double e : rep.weighted_error) EXPECT_DOUBLE_EQ(e, 1.0);
}

TEST(Rate, RejectsBadInput) {
    const auto& fx = pme();
    EXPECT_THROW(rate_report_degenerate(Trajectory{}, fx.f, fx.prm, fx.dom), InvalidArgument);
    const auto traj = separate_variables(fx.f, fx.prm, 1.0, {1.0, 2.0});
    EXPECT_THROW(rate_report_degenerate(traj, fx.f, fx.prm, fx.dom, 10.0), InvalidArgument);
    EXPECT_THROW(rate_report_degenerate(traj, Field(fx.f.size(), 0.0), fx.prm, fx.dom), InvalidArgument);
    EXPECT_THROW(rate_report_degenerate(traj, fx.f, Parameters::make(1, 2), fx.dom), RegimeError);
}

TEST(Rate, ExplicitFitWindow) {
    const auto& fx = pme();
    const auto traj = separate_variables(fx.f, fx.prm, 1.0, geometric_times(1.0, 1e4, 81));
    const auto rep = rate_report_degenerate(traj, fx.f, fx.prm, fx.dom, 0.0, std::pair{10.0, 1000.0});
    EXPECT_EQ(rep.fit.points, 41u);
}

TEST(Positivity, PositiveDataIsImmediate) {
    const auto d = Domain::interval(1.0, 65);
    Trajectory traj;
    const auto u = d.sample([](double x) { return x * (1 - x); });
    for (double t : {0.5, 1.0}) traj.states.push_back({t, u});
    const auto rep = positivity_experiment(traj, d, 0.1);
    ASSERT_TRUE(rep.T_inner && rep.T_boundary);
    EXPECT_EQ(*rep.T_inner, 0.5);
    EXPECT_EQ(*rep.T_boundary, 0.5);
}

TEST(Positivity, CentralBumpWithinBarenblattBounds) {
    const auto prm = Parameters::make(2, 2);
    const auto d = Domain::interval(1.0, 129);
    auto c = SolverControls::defaults_for(2);
    c.dt = 1e-3;
    c.dt_max = 1e-2;
    const auto traj = solve(bump(d, 0.5, 0.1), 5.0, prm, d, c, linear_times(0.01, 5.0, 500));
    const auto rep = positivity_experiment(traj, d, 0.1);
    ASSERT_TRUE(rep.T_inner && rep.T_boundary);
    EXPECT_LE(*rep.T_inner, *rep.T_boundary);
    // Barenblatt below the data: radius 0.05, height 1 - (0.05/0.1)^2
    const double eps = 0.75;
    EXPECT_LE(*rep.T_inner, barenblatt_positivity_bound(prm, eps, 0.05, 0.4));
    EXPECT_LE(*rep.T_boundary, barenblatt_positivity_bound(prm, eps, 0.05, 0.5));
}

TEST(Positivity, LeftHalfDataFillsDomain) {
    const auto prm = Parameters::make(2, 2);
    const auto d = Domain::interval(1.0, 129);
    auto c = SolverControls::defaults_for(2);
    c.dt = 1e-3;
    c.dt_max = 1e-2;
    const auto traj = solve(bump(d, 0.2, 0.15), 5.0, prm, d, c, linear_times(0.01, 5.0, 500));
    EXPECT_EQ(traj.states.front().u[100], 0.0);
    const auto rep = positivity_experiment(traj, d, 0.1);
    ASSERT_TRUE(rep.T_boundary.has_value());
    EXPECT_GT(*rep.T_boundary, 0.01);
}

TEST(Positivity, UnreachedAndEmptyRegion) {
    const auto prm = Parameters::make(2, 2);
    const auto d = Domain::interval(1.0, 129);
    const auto traj = solve(bump(d, 0.5, 0.1), 1e-3, prm, d, fixed_dt(2, 1e-4), std::vector<double>{1e-3});
    const auto rep = positivity_experiment(traj, d, 0.1);
    EXPECT_FALSE(rep.T_inner.has_value());
    EXPECT_FALSE(rep.T_boundary.has_value());
    EXPECT_THROW(positivity_experiment(traj, d, 0.6), EmptyRegion);
    EXPECT_THROW(positivity_experiment(traj, d, -1.0), InvalidArgument);
}

TEST(Sandwich, ExactSeparateVariables) {
    const auto& fx = pme();
    const auto traj = separate_variables(fx.f, fx.prm, 0.7, linear_times(0.1, 10.0, 30));
    const auto rep = sandwich_check(traj, fx.f, fx.prm, fx.dom, 0.1);
    EXPECT_TRUE(rep.ok) << rep.reason;
    EXPECT_NEAR(rep.s0, 0.7, 1e-9);
    EXPECT_NEAR(rep.s1, 0.7, 1e-9);
}

TEST(Sandwich, BumpDataAdmitFiniteOffsets) {
    const auto& fx = pme();
    auto c = SolverControls::defaults_for(2);
    c.dt = 1e-3;
    c.dt_max = 1e-2;
    for (const auto& u0 : {bump(fx.dom, 0.5, 0.1), bump(fx.dom, 0.35, 0.25, 3.0)}) {
        const auto traj = solve(u0, 20.0, fx.prm, fx.dom, c, linear_times(0.01, 20.0, 400));
        const auto pos = positivity_experiment(traj, fx.dom, 0.1);
        ASSERT_TRUE(pos.T_boundary.has_value());
        const auto rep = sandwich_check(traj, fx.f, fx.prm, fx.dom, *pos.T_boundary);
        EXPECT_TRUE(rep.ok) << rep.reason;
        EXPECT_GT(rep.s1, 0.0);
        EXPECT_TRUE(std::isfinite(rep.s0));
        EXPECT_LE(rep.s1, rep.s0);
        for (const auto& s : traj.states) {
            for (std::size_t i : fx.dom.interior()) {
                EXPECT_LE(s.u[i], std::pow(rep.s1 + s.t, -fx.prm.mu) * fx.f[i] * (1 + 1e-12));
                if (s.t >= rep.T4) {
                    EXPECT_GE(s.u[i], std::pow(rep.s0 + s.t, -fx.prm.mu) * fx.f[i] * (1 - 1e-12));
                }
            }
        }
    }
}

TEST(Sandwich, FailsWhenSolutionVanishesAfterT4) {
    const auto& fx = pme();
    auto traj = separate_variables(fx.f, fx.prm, 1.0, {1.0, 2.0});
    traj.states.back().u[10] = 0.0;
    const auto rep = sandwich_check(traj, fx.f, fx.prm, fx.dom, 0.5);
    EXPECT_FALSE(rep.ok);
    EXPECT_FALSE(rep.reason.empty());
    EXPECT_FALSE(sandwich_check(traj, fx.f, fx.prm, fx.dom, 100.0).ok);
}

TEST(Envelopes, ConstantMultiple) {
    const auto d = Domain::interval(1.0, 33);
    const auto S = d.sample([](double x) { return std::sin(std::numbers::pi * x); });
    const auto env = envelope_constants(constant_multiples(S, {2.0, 2.0}), S, d);
    for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_NEAR(env.c_upper[k], 2.0, 1e-15);
        EXPECT_NEAR(env.c_lower[k], 2.0, 1e-15);
    }
}

TEST(Envelopes, TimeVaryingConstant) {
    const auto d = Domain::interval(1.0, 33);
    const auto S = d.sample([](double x) { return x * (1 - x); });
    const std::vector<double> c{3.0, 2.5, 2.2};
    const auto env = envelope_constants(constant_multiples(S, c), S, d);
    for (std::size_t k = 0; k < c.size(); ++k) {
        EXPECT_NEAR(env.c_upper[k], c[k], 1e-14);
        EXPECT_NEAR(env.c_lower[k], c[k], 1e-14);
    }
    EXPECT_NEAR(env.c_upper_inf, 2.2, 1e-14);
    EXPECT_GT(env.monotonicity_violation(), 0.0);
}

TEST(Envelopes, RejectsVanishingProfile) {
    const auto d = Domain::interval(1.0, 33);
    EXPECT_THROW(envelope_constants(constant_multiples(Field(33, 0.0), {1.0}), Field(33, 0.0), d), InvalidArgument);
}

TEST(RelativeError, Examples) {
    const auto d = Domain::interval(1.0, 33);
    const auto S = d.sample([](double x) { return x * (1 - x); });
    for (double m : {0.5, 1.0, 2.0}) {
        for (double x : relative_error_field(S, S, m, d)) EXPECT_NEAR(x, 0.0, 1e-15);
        Field v(S);
        for (double& x : v) x *= std::pow(2.0, 1 / m);
        const auto phi = relative_error_field(v, S, m, d);
        for (std::size_t i : d.interior()) EXPECT_NEAR(phi[i], 1.0, 1e-14);
        EXPECT_EQ(phi.front(), 0.0);
    }
    EXPECT_THROW(relative_error_field(S, Field(33, 0.0), 1.0, d), InvalidArgument);
}

TEST(Quasilinear, HeatEigenmodeAmplitude) {
    const auto d = Domain::interval(1.0, 129);
    const auto u0 = d.sample([](double x) { return 3 * std::sin(std::numbers::pi * x); });
    const auto prm = Parameters::make(1, 2);
    const auto r = solve_quasilinear_rescaled(u0, prm, d, fixed_dt(2, 1e-2), linear_times(0.1, 1.0, 10), heat_eig().lambda1);
    const auto rep = quasilinear_convergence_report(r, heat_eig(), prm, d);
    EXPECT_NEAR(rep.c_star, 3.0, 0.03);
}

TEST(Quasilinear, HeatFourierCoefficient) {
    const auto d = Domain::interval(1.0, 129);
    auto data = [](double x) { return std::sin(std::numbers::pi * x) + 0.3 * std::max(0.0, std::sin(3 * std::numbers::pi * x)); };
    double b1 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = (i + 0.5) / n;
        b1 += 2 * data(x) * std::sin(std::numbers::pi * x) / n;
    }
    const auto prm = Parameters::make(1, 2);
    const auto r = solve_quasilinear_rescaled(d.sample(data), prm, d, fixed_dt(2, 1e-2), linear_times(0.05, 2.0, 40),
                                              heat_eig().lambda1);
    const auto rep = quasilinear_convergence_report(r, heat_eig(), prm, d);
    EXPECT_NEAR(rep.c_star, b1, 0.02 * b1);
    EXPECT_TRUE(rep.gap_monotone);
    EXPECT_LT(rep.final_ref_sup, 1e-3);
}

TEST(Quasilinear, NonlinearProfileIsStationary) {
    const auto d = Domain::interval(1.0, 129);
    const auto prm = Parameters::make(0.5, 3);
    Field S(p3_eig().V);
    for (double& x : S) x = x * x;
    const auto r = solve_quasilinear_rescaled(S, prm, d, fixed_dt(3, 1e-2), linear_times(0.1, 1.0, 10), p3_eig().lambda1);
    const auto rep = quasilinear_convergence_report(r, p3_eig(), prm, d);
    EXPECT_NEAR(rep.c_star, 1.0, 1e-8);
    for (double e : rep.ref_sup) EXPECT_LT(e, 1e-8);
}

TEST(Quasilinear, ShortHorizonNotConverged) {
    const auto d = Domain::interval(1.0, 129);
    const auto prm = Parameters::make(1, 2);
    const auto u0 = bump(d, 0.3, 0.2);
    const auto r = solve_quasilinear_rescaled(u0, prm, d, fixed_dt(2, 1e-3), std::vector<double>{0.01}, heat_eig().lambda1);
    EXPECT_THROW(quasilinear_convergence_report(r, heat_eig(), prm, d), NotConverged);
}

TEST(Quasilinear, Preconditions) {
    const auto d = Domain::interval(1.0, 129);
    const auto u0 = bump(d, 0.3, 0.2);
    EXPECT_THROW(solve_quasilinear_rescaled(u0, Parameters::make(2, 2), d, fixed_dt(2, 1e-3), std::vector<double>{1.0}, 9.87),
                 RegimeError);
    EXPECT_THROW(solve_quasilinear_rescaled(u0, Parameters::make(1, 2), d, fixed_dt(2, 0.5), std::vector<double>{1.0}, 9.87),
                 InvalidArgument);
}

TEST(EnvelopeProperty, MonotoneAndOrderedOnRandomRuns) {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto d = Domain::interval(1.0, 129);
    for (int k = 0; k < 6; ++k) {
        const bool heat = k % 2 == 0;
        const auto prm = heat ? Parameters::make(1, 2) : Parameters::make(0.5, 3);
        const auto& eig = heat ? heat_eig() : p3_eig();
        Field u0 = bump(d, 0.3 + 0.4 * unit(rng), 0.2 + 0.3 * unit(rng), 0.5 + 2 * unit(rng));
        const Field extra = bump(d, 0.2 + 0.6 * unit(rng), 0.1 + 0.2 * unit(rng), unit(rng));
        for (std::size_t i = 0; i < u0.size(); ++i) u0[i] += extra[i];
        const auto r = solve_quasilinear_rescaled(u0, prm, d, fixed_dt(prm.p, 1e-2), linear_times(0.1, 6.0, 60), eig.lambda1);
        const auto rep = quasilinear_convergence_report(r, eig, prm, d, 1.0);
        EXPECT_LE(rep.envelopes.monotonicity_violation(), 1e-8) << "run " << k;
        for (std::size_t j = 0; j < rep.gap.size(); ++j) {
            EXPECT_LE(rep.envelopes.c_lower[j], rep.c_star + 1e-12);
            EXPECT_GE(rep.envelopes.c_upper[j], rep.c_star - 1e-12);
        }
    }
}

TEST(Barriers, UpperHeatOmegaFormula) {
    const auto d = Domain::interval(1.0, 129);
    const auto bounds = measure_barrier_bounds(heat_eig(), 2, d, 1.0, 1.0);
    const auto b = choose_upper_barrier(0.1, bounds);
    EXPECT_NEAR(b.omega, 2 * b.K1 * b.K1 / bounds.C1(), 1e-14);
    EXPECT_NEAR(bounds.C1(), bounds.C1m, 1e-15);
    for (double x : {b.A, b.B, b.C, b.xi, b.delta, b.T}) {
        EXPECT_GT(x, 0.0);
        EXPECT_TRUE(std::isfinite(x));
    }
}

TEST(Barriers, ChosenConstantsHaveNonnegativeSlack) {
    const auto d = Domain::interval(1.0, 129);
    for (const auto* eig : {&heat_eig(), &p3_eig()}) {
        const double p = eig == &heat_eig() ? 2 : 3;
        for (double phi : {0.5, 1.0, 3.0})
            for (double eps : {0.2, 0.05}) {
                const auto bounds = measure_barrier_bounds(*eig, p, d, phi, phi);
                EXPECT_GE(choose_upper_barrier(eps, bounds).condition_slack(), 0.0);
                EXPECT_GE(choose_lower_barrier(eps, bounds).condition_slack(), 0.0);
            }
    }
}

TEST(Barriers, SmallerEpsShrinksDeltaAndExtendsHorizon) {
    const auto d = Domain::interval(1.0, 129);
    const auto bounds = measure_barrier_bounds(heat_eig(), 2, d, 1.0, 1.0);
    for (auto choose : {&choose_upper_barrier, &choose_lower_barrier}) {
        double prev_delta = std::numeric_limits<double>::infinity(), prev_T = 0;
        for (double eps : {0.4, 0.2, 0.1, 0.05, 0.01}) {
            const auto b = choose(eps, bounds, 0.0);
            EXPECT_LE(b.delta, prev_delta);
            EXPECT_GT(b.T, prev_T);
            prev_delta = b.delta;
            prev_T = b.T;
        }
    }
}

TEST(Barriers, ResidualNonnegativeForChosenConstants) {
    const auto d = Domain::interval(1.0, 129);
    for (const auto* eig : {&heat_eig(), &p3_eig()}) {
        const double p = eig == &heat_eig() ? 2 : 3;
        const auto bounds = measure_barrier_bounds(*eig, p, d, 1.0, 1.0);
        const auto up = choose_upper_barrier(0.1, bounds, 0.5);
        const auto lo = choose_lower_barrier(0.1, bounds, 0.5);
        EXPECT_GE(barrier_residual(up, eig->V, eig->lambda1, p, d).min_residual, -1e-8);
        EXPECT_GE(barrier_residual(lo, eig->V, eig->lambda1, p, d).min_residual, -1e-8);
    }
}

TEST(Barriers, ViolatedConditionGivesNegativeResidual) {
    const auto d = Domain::interval(1.0, 129);
    for (const auto* eig : {&heat_eig(), &p3_eig()}) {
        const double p = eig == &heat_eig() ? 2 : 3;
        auto bad = choose_upper_barrier(0.1, measure_barrier_bounds(*eig, p, d, 1.0, 1.0));
        bad.B *= 1e-3;
        EXPECT_LT(bad.condition_slack(), 0.0);
        EXPECT_LT(barrier_residual(bad, eig->V, eig->lambda1, p, d).min_residual, 0.0);
    }
}

TEST(Barriers, ConstantBarrierReducesToEigenEquation) {
    const auto d = Domain::interval(1.0, 129);
    auto b = choose_upper_barrier(0.1, measure_barrier_bounds(heat_eig(), 2, d, 1.0, 1.0));
    b.A = 0;
    b.B = 0;
    const auto res = barrier_residual(b, heat_eig().V, heat_eig().lambda1, 2, d);
    EXPECT_NEAR(res.min_residual, 0.0, 1e-6);
    EXPECT_GT(res.points, 0u);
}

TEST(Barriers, EmptyRegionAndInfeasible) {
    const auto d = Domain::interval(1.0, 129);
    auto bounds = measure_barrier_bounds(heat_eig(), 2, d, 1.0, 1.0);
    auto b = choose_upper_barrier(0.1, bounds);
    b.xi = 1e-4;
    EXPECT_THROW(barrier_residual(b, heat_eig().V, heat_eig().lambda1, 2, d), EmptyRegion);
    auto flat = bounds;
    for (double& g : flat.face_gradient) g = 0.0;
    EXPECT_THROW(choose_upper_barrier(0.1, flat), Infeasible);
    EXPECT_THROW(choose_lower_barrier(0.1, flat), Infeasible);
    auto zero = bounds;
    zero.C1m = 0;
    EXPECT_THROW(choose_upper_barrier(0.1, zero), Infeasible);
    EXPECT_THROW(choose_upper_barrier(-0.1, bounds), InvalidArgument);
}
