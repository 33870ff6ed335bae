#include "gridflex/ccore.hpp"
#include "gridflex/error.hpp"
#include "gridflex/orchestrator.hpp"
#include "gridflex/validate.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <random>

using namespace gridflex;
using namespace gridflex::testing;

namespace {

// Two buses, renewable at bus 1, both generators share the response.
struct TightToy {
    Grid grid = toy_grid(2, {{0, 1, 10.0, 1.6}}, {{0, 2.0, 0.01, 10.0}, {1, 2.0, 0.02, 12.0}},
                         Vector(Eigen::Vector2d(0.3, 1.2)), 0.05);
    UncertaintyModel unc = diagonal_uncertainty(2, {1}, 0.09);
};

double upper_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace

TEST(WilsonInterval, KnownValue) {
    const Interval w = wilson_interval(5, 100, 1.959963984540054);
    EXPECT_NEAR(w.lower, 0.021543, 1e-5);
    EXPECT_NEAR(w.upper, 0.111750, 1e-5);
    const Interval zero = wilson_interval(0, 1000, kWilson99);
    EXPECT_EQ(zero.lower, 0.0);
    EXPECT_GT(zero.upper, 0.0);
}

TEST(MonteCarlo, RefusesSmallSamples) {
    TightToy t;
    const auto d = DispatchDecision::from_generators(t.grid, Eigen::Vector2d(0.75, 0.75), Eigen::Vector2d(0.5, 0.5),
                                                     t.grid.rated_susceptance());
    try {
        monte_carlo_validate(t.grid, t.unc, d, 999, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DomainError);
    }
}

TEST(MonteCarlo, RatesMatchGaussianTails) {
    TightToy t;
    // Generator 0 output: P0 - 0.4 u with std 0.4 * 0.3 = 0.12; put p_max 1.5 sigma above.
    const double sigma_g = 0.4 * 0.3;
    const double p0 = 2.0 - 1.5 * sigma_g;
    const auto d = DispatchDecision::from_generators(t.grid, Eigen::Vector2d(p0, 1.5 - p0), Eigen::Vector2d(0.4, 0.6),
                                                     t.grid.rated_susceptance());
    const std::int64_t n = 200000;
    const ValidationReport r = monte_carlo_validate(t.grid, t.unc, d, n, 42);
    EXPECT_TRUE(r.balanced);
    const double expected_gen = upper_tail(1.5);
    // Line flow: f = f0 - 0.4 u on the 0->1 line, i.e. std 0.12 around f0.
    const double f0 = p0 - 0.3;
    const double cap = 1.6;
    for (const RateEstimate& e : r.rates) {
        double expected = 0.0;
        if (e.kind == ConstraintKind::GenerationUpper && e.index == 0) expected = expected_gen;
        if (e.kind == ConstraintKind::FlowUpper) expected = upper_tail((cap - f0) / sigma_g);
        if (e.kind == ConstraintKind::FlowLower) expected = upper_tail((cap + f0) / sigma_g);
        if (e.kind == ConstraintKind::GenerationLower && e.index == 1) expected = upper_tail((1.5 - p0) / (0.6 * 0.3));
        if (e.kind == ConstraintKind::GenerationUpper && e.index == 1) expected = upper_tail((2.0 - 1.5 + p0) / (0.6 * 0.3));
        if (e.kind == ConstraintKind::GenerationLower && e.index == 0) expected = upper_tail(p0 / sigma_g);
        const double tol = 5.0 * std::sqrt(std::max(expected * (1.0 - expected), 1.0 / n) / n);
        EXPECT_NEAR(e.rate, expected, tol) << to_string(e.kind) << " " << e.index;
    }
    // 6.7% upper-tail rate exceeds epsilon = 5% by far more than the 3-sigma band.
    EXPECT_FALSE(r.all_pass);
}

TEST(MonteCarlo, ReproducibleAcrossWorkerCounts) {
    TightToy t;
    const auto d = DispatchDecision::from_generators(t.grid, Eigen::Vector2d(0.8, 0.7), Eigen::Vector2d(0.5, 0.5),
                                                     t.grid.rated_susceptance());
    ::setenv("GRIDFLEX_THREADS", "1", 1);
    const ValidationReport a = monte_carlo_validate(t.grid, t.unc, d, 50000, 7);
    ::setenv("GRIDFLEX_THREADS", "3", 1);
    const ValidationReport b = monte_carlo_validate(t.grid, t.unc, d, 50000, 7);
    ::unsetenv("GRIDFLEX_THREADS");
    ASSERT_EQ(a.rates.size(), b.rates.size());
    for (std::size_t i = 0; i < a.rates.size(); ++i) EXPECT_EQ(a.rates[i].violations, b.rates[i].violations);
    EXPECT_EQ(a.cost.mean, b.cost.mean);
    const ValidationReport c = monte_carlo_validate(t.grid, t.unc, d, 50000, 8);
    EXPECT_NE(a.cost.mean, c.cost.mean);
}

TEST(MonteCarlo, SamplingRoutesAgree) {
    const Grid g = toy_grid(3, {{0, 1, 5.0, 1.0}, {1, 2, 5.0, 1.0}, {0, 2, 5.0, 1.0}},
                            {{0, 3.0, 0.01, 10.0}, {2, 3.0, 0.01, 12.0}}, Vector::Constant(3, 0.4), 0.05);
    Matrix sigma = Matrix::Zero(3, 3);
    sigma(1, 1) = 0.04;
    sigma(2, 2) = 0.09;
    sigma(1, 2) = sigma(2, 1) = -0.03;
    const UncertaintyModel unc(sigma, {false, true, true});
    const auto d = DispatchDecision::from_generators(g, Eigen::Vector2d(0.6, 0.6), Eigen::Vector2d(0.3, 0.7),
                                                     g.rated_susceptance());
    const std::int64_t n = 200000;
    const ValidationReport sym = monte_carlo_validate(g, unc, d, n, 5, SamplingRoute::SymmetricRoot);
    const ValidationReport piv = monte_carlo_validate(g, unc, d, n, 5, SamplingRoute::PivotedFactor);
    ASSERT_EQ(sym.rates.size(), piv.rates.size());
    for (std::size_t i = 0; i < sym.rates.size(); ++i) {
        const double p = 0.5 * (sym.rates[i].rate + piv.rates[i].rate);
        EXPECT_NEAR(sym.rates[i].rate, piv.rates[i].rate, 6.0 * std::sqrt(std::max(p, 1.0 / n) / n));
    }
    EXPECT_NEAR(sym.cost.mean, piv.cost.mean, 6.0 * sym.cost.std_error);
}

TEST(MonteCarlo, EmpiricalCostMatchesClosedForm) {
    TightToy t;
    const auto d = DispatchDecision::from_generators(t.grid, Eigen::Vector2d(0.8, 0.7), Eigen::Vector2d(0.35, 0.65),
                                                     t.grid.rated_susceptance());
    const CostEstimate c = empirical_cost(t.grid, t.unc, d, 200000, 3);
    EXPECT_NEAR(c.mean, expected_cost(d, t.grid, t.unc.s_sigma()), 4.0 * c.std_error);
}

TEST(MonteCarlo, UnbalancedDecisionFails) {
    StudyConfig cfg;
    const CaseModel m = load_fixture("case14.m", "flex14.scenario", &cfg);
    const SolveReport s = solve_cced(m.grid.without_flexibility(), m.uncertainty, cfg);
    const DispatchDecision ok = s.decision(m.grid);
    const DispatchDecision scaled(m.grid, 1.2 * ok.p_base(), ok.alpha(), ok.susceptance());
    const ValidationReport good = monte_carlo_validate(m.grid, m.uncertainty, ok, 20000, 1);
    const ValidationReport bad = monte_carlo_validate(m.grid, m.uncertainty, scaled, 20000, 1);
    EXPECT_TRUE(good.all_pass);
    EXPECT_FALSE(bad.balanced);
    EXPECT_FALSE(bad.all_pass);
}

TEST(FiniteDifferences, PassOnIeee14) {
    StudyConfig cfg;
    const CaseModel m = load_fixture("case14.m", "flex14.scenario", &cfg);
    const SolveReport s = solve_cced(m.grid, m.uncertainty, cfg);
    const FiniteDifferenceReport r = finite_difference_suite(m.grid, m.uncertainty, s.decision(m.grid));
    EXPECT_TRUE(r.pass());
    EXPECT_EQ(r.families.size(), 4u);
    for (const DerivativeCheck& c : r.families) EXPECT_GT(c.checked, 0) << c.family;
}

TEST(FiniteDifferences, PassOnRandomSixBusGraphs) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const Grid g = random_six_bus(rng);
        const UncertaintyModel unc = diagonal_uncertainty(6, {1, 3, 5}, 0.01);
        Vector part(3);
        for (int k = 0; k < 3; ++k) part[k] = u(rng);
        part /= part.sum();
        const auto d = DispatchDecision::from_generators(g, Vector::Constant(3, g.load().sum() / 3.0), part,
                                                         g.rated_susceptance());
        const FiniteDifferenceReport r = finite_difference_suite(g, unc, d);
        EXPECT_TRUE(r.pass()) << "trial " << trial;
    }
}
